"""
Tests for the instance_generator module
"""

import math

import numpy as np
import pytest
import yaml

from modules.errors import ProfileInvalid
from modules.instance_generator import (NAMED_PROFILES, InstanceProfile, generate_instance, load_profile,
                                        named_profile)
from modules.model import build_travel_matrix, save_instance, validate_instance


@pytest.fixture(name='profile')
def profile_fixture():
    """Fixture for a small custom profile."""
    return InstanceProfile('custom', 8, 2, 1, 1, 300.0, seed=3, depot_distance=20.0, district_radius=8.0)


class TestNamedProfiles:
    """Test cases for the six benchmark profiles."""

    @pytest.mark.parametrize('name', sorted(NAMED_PROFILES))
    def test_counts(self, name):
        """Test deliveries, TP count, fleet mix and working day."""
        profile = NAMED_PROFILES[name]

        instance = generate_instance(profile)
        owned = [t for t in instance.fleet if not t.is_rental]

        assert instance.name == name
        assert len(instance.deliveries) == profile.deliveries
        assert len(instance.tp_deliveries) == profile.tp_count
        assert len(owned) == profile.owned
        assert len(instance.fleet) - len(owned) == profile.rental
        assert instance.working_day == profile.working_day
        assert validate_instance(instance) == []

    @pytest.mark.parametrize('name', sorted(NAMED_PROFILES))
    def test_district_is_wide(self, name):
        """Test that deliveries spread over the district instead of piling on one spot."""
        profile = NAMED_PROFILES[name]
        points = np.array([(d.location.x, d.location.y) for d in generate_instance(profile).deliveries])

        spread = max(float(np.linalg.norm(a - b)) for a in points for b in points)

        assert profile.district_radius / 2 < spread <= 2 * profile.district_radius + 1e-3

    def test_unknown_name(self):
        """Test that only the six profiles are named."""
        with pytest.raises(ProfileInvalid):
            named_profile('D99_P9')

    def test_seed_override(self):
        """Test that a replacement seed changes the geometry only."""
        base = generate_instance(named_profile('D14_P1'))
        other = generate_instance(named_profile('D14_P1', seed=7))

        assert named_profile('D14_P1', seed=7).seed == 7
        assert len(other.deliveries) == len(base.deliveries)
        assert other.deliveries[0].location != base.deliveries[0].location

    def test_duplicate_customer(self):
        """Test that a duplicate customer shares the first order's spot."""
        instance = generate_instance(named_profile('D16_P1'))
        first, second = instance.delivery(2), instance.delivery(3)

        assert first.customer_id == second.customer_id == 2
        assert (first.location.x, first.location.y) == (second.location.x, second.location.y)
        assert first.location.id != second.location.id

    @pytest.mark.parametrize('name', ['D14_P2', 'D21_P2'])
    def test_separate_tps(self, name):
        """Test that visiting one TP first makes the other one late."""
        instance = generate_instance(named_profile(name))
        travel = build_travel_matrix(instance)
        first, second = instance.tp_deliveries

        for a, b in ((first, second), (second, first)):
            assert travel[0, a.id] + travel[a.id, b.id] > b.tp_deadline
            assert travel[0, b.id] <= b.tp_deadline


class TestGenerateInstance:
    """Test cases for custom profiles."""

    def test_deterministic(self, profile, tmp_path):
        """Test that a profile always writes the same file."""
        first, second = tmp_path / 'first.json', tmp_path / 'second.json'

        save_instance(generate_instance(profile), str(first))
        save_instance(generate_instance(profile), str(second))

        assert first.read_bytes() == second.read_bytes()

    def test_fleet(self, profile):
        """Test fleet order and prices."""
        fleet = generate_instance(profile).fleet

        assert [t.id for t in fleet] == [1, 2]
        assert not fleet[0].is_rental and fleet[0].rental_cost == 0.0
        assert fleet[1].is_rental and 50.0 <= fleet[1].rental_cost <= 150.0

    def test_load_ratio(self, profile):
        """Test that the total load stays within the requested share of the fleet."""
        instance = generate_instance(profile)
        capacity = sum(t.max_weight for t in instance.fleet)

        assert sum(d.weight for d in instance.deliveries) <= profile.load_ratio * capacity + 0.1 * 8

    def test_deadlines(self, profile):
        """Test that every TP deadline is reachable and within the working day."""
        instance = generate_instance(profile)

        for tp in instance.tp_deliveries:
            direct = math.hypot(tp.location.x, tp.location.y)
            assert direct <= tp.tp_deadline <= instance.working_day

    def test_no_slack_deadlines(self, profile):
        """Test that a zero slack share puts each deadline on the direct travel time."""
        instance = generate_instance(InstanceProfile.from_dict({**profile.to_dict(), 'tp_slack_range': (0.0, 0.0)}))

        for tp in instance.tp_deliveries:
            direct = math.hypot(tp.location.x, tp.location.y)
            assert direct <= tp.tp_deadline <= direct + 1e-4

    def test_uniform_geometry(self):
        """Test deliveries spread over the coordinate square."""
        profile = InstanceProfile('spread', 10, 0, 1, 0, 1000.0, seed=1, district_radius=None,
                                  coordinate_bound=30.0)

        instance = generate_instance(profile)

        assert all(abs(d.location.x) <= 30.0 and abs(d.location.y) <= 30.0 for d in instance.deliveries)


class TestProfiles:
    """Test cases for profile checks and loading."""

    @pytest.mark.parametrize('changes', [
        {'tp_count': 9},
        {'owned': 0, 'rental': 0},
        {'load_ratio': 1.5},
        {'duplicate_customers': 4},
        {'weight_range': (10.0, 5.0)},
        {'working_day': 30.0},
        {'seed': -1},
        {'tp_slack_range': (0.5, 0.25)},
        {'district_radius': 25.0},
    ])
    def test_invalid(self, profile, changes):
        """Test profiles that cannot produce an instance."""
        data = {**profile.to_dict(), **changes}

        with pytest.raises(ProfileInvalid):
            generate_instance(InstanceProfile.from_dict(data))

    def test_named_counts_are_fixed(self):
        """Test that a named profile keeps its counts."""
        with pytest.raises(ProfileInvalid):
            InstanceProfile('D14_P1', 10, 1, 2, 3, 480.0).validate()

    def test_unknown_field(self):
        """Test that typos in profile files are reported."""
        with pytest.raises(ProfileInvalid):
            InstanceProfile.from_dict({'name': 'x', 'deliverys': 3})

    def test_load_profile_file(self, profile, tmp_path):
        """Test reading a YAML profile with a seed override."""
        path = tmp_path / 'profile.yaml'
        path.write_text(yaml.safe_dump(profile.to_dict()), encoding='utf-8')

        loaded = load_profile(str(path), seed=11)

        assert loaded.seed == 11
        assert loaded.weight_range == profile.weight_range
        assert loaded.deliveries == profile.deliveries

    def test_load_profile_missing(self, tmp_path):
        """Test a reference that is neither a name nor a file."""
        with pytest.raises(ProfileInvalid):
            load_profile(str(tmp_path / 'absent.yaml'))
