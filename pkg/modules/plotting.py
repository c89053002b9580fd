"""
Route Plotting

SVG route maps: the depot, every delivery point (TP points ringed in red)
and one coloured polyline per truck, with the route distance in the legend.
"""

import logging
from typing import Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # pylint: disable=wrong-import-position

from .model import ProblemInstance  # pylint: disable=wrong-import-position
from .orchestrator import Q4rpdSolution  # pylint: disable=wrong-import-position

logger = logging.getLogger(__name__)

# Fixed element ids make repeated renders byte-identical.
plt.rcParams['svg.hashsalt'] = 'q4rpd'
plt.rcParams['svg.fonttype'] = 'none'

ROUTE_COLORS = ('tab:blue', 'tab:orange', 'tab:green', 'tab:purple', 'tab:brown',
                'tab:pink', 'tab:olive', 'tab:cyan', 'tab:gray')
FIGURE_SIZE = (8, 8)


def emit_svg(solution: Q4rpdSolution, instance: ProblemInstance, path: str,
             title: Optional[str] = None) -> None:
    """
    Draw a solution as an SVG file.

    Args:
        solution: Solution to draw
        instance: Instance the solution belongs to
        path: Output file
        title: Figure title, the instance name by default

    Raises:
        OSError: The file cannot be written
    """
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    try:
        coords = {instance.depot.id: (instance.depot.x, instance.depot.y)}
        coords.update({d.id: (d.location.x, d.location.y) for d in instance.deliveries})

        regular = [d for d in instance.deliveries if not d.is_tp]
        tps = instance.tp_deliveries
        ax.scatter([d.location.x for d in regular], [d.location.y for d in regular],
                   s=18, c='black', zorder=3, label='Delivery')
        if tps:
            ax.scatter([d.location.x for d in tps], [d.location.y for d in tps],
                       s=18, c='black', zorder=3)
            ax.scatter([d.location.x for d in tps], [d.location.y for d in tps],
                       s=160, facecolors='none', edgecolors='red', linewidths=1.5, zorder=4,
                       label='TP delivery')
        ax.scatter([instance.depot.x], [instance.depot.y], s=90, marker='s', c='red', zorder=5,
                   label='Depot')

        for index, truck_route in enumerate(solution.routes):
            stops = truck_route.route.stops
            xs = [coords[s][0] for s in stops]
            ys = [coords[s][1] for s in stops]
            ax.plot(xs, ys, '-', linewidth=1.2, color=ROUTE_COLORS[index % len(ROUTE_COLORS)], zorder=2,
                    label=f"Truck {truck_route.truck_id}: {truck_route.route.distance:.2f}")

        ax.set_title(title or instance.name or 'Q4RPD solution')
        ax.set_aspect('equal', adjustable='datalim')
        ax.legend(loc='best', fontsize='small')
        fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(fig)
    logger.info("Wrote %s routes to %s", len(solution.routes), path)
