"""
Tests for loading, validating and filtering affiliation data
"""
import io
import json

import pytest

from data_loader import (
    AffiliationDataset, DataError, DataLoader, GroupRecord, MembershipRecord, Visibility,
)


def as_stream(payload) -> io.BytesIO:
    text = payload if isinstance(payload, str) else json.dumps(payload)
    return io.BytesIO(text.encode("utf-8"))


def make_dataset(groups, memberships) -> AffiliationDataset:
    return AffiliationDataset.build(
        [GroupRecord(gid, f"Group {gid}", city=city, visibility=vis) for gid, city, vis in groups],
        [MembershipRecord(u, g) for u, g in memberships],
    )


# ==================== load_groups ====================

def test_load_groups_json():
    groups = DataLoader.load_groups(as_stream([
        {"id": "g1", "name": "Python Dublin", "description": "Talks", "city": "Dublin", "members": 120},
        {"id": "g2", "name": "Hiking Club", "visibility": "private"},
    ]), "json")

    by_id = {g.group_id: g for g in groups}
    assert set(by_id) == {"g1", "g2"}
    assert by_id["g1"].member_count_declared == 120
    assert by_id["g1"].visibility == Visibility.PUBLIC
    assert by_id["g2"].description == ""
    assert by_id["g2"].visibility == Visibility.PRIVATE


def test_load_groups_empty_array():
    assert DataLoader.load_groups(as_stream([]), "json") == set()


def test_load_groups_duplicate_id():
    with pytest.raises(DataError, match="g1"):
        DataLoader.load_groups(as_stream([{"id": "g1", "name": "A"}, {"id": "g1", "name": "B"}]), "json")


def test_load_groups_missing_name_names_index():
    with pytest.raises(DataError, match="record 1"):
        DataLoader.load_groups(as_stream([{"id": "g1", "name": "A"}, {"id": "g2"}]), "json")


def test_load_groups_missing_id_names_index():
    with pytest.raises(DataError, match="record 0"):
        DataLoader.load_groups(as_stream([{"name": "A"}]), "json")


def test_load_groups_invalid_visibility():
    with pytest.raises(DataError, match="visibility"):
        DataLoader.load_groups(as_stream([{"id": "g1", "name": "A", "visibility": "secret"}]), "json")


@pytest.mark.parametrize("members", [3.7, True, False, -1, "abc", "2.5", [4]])
def test_load_groups_rejects_bad_member_count(members):
    with pytest.raises(DataError, match="record 1.*'members'"):
        DataLoader.load_groups(as_stream([
            {"id": "g1", "name": "A", "members": 5},
            {"id": "g2", "name": "B", "members": members},
        ]), "json")


def test_load_groups_accepts_whole_float_member_count():
    groups = DataLoader.load_groups(as_stream([{"id": "g1", "name": "A", "members": 120.0}]), "json")
    assert next(iter(groups)).member_count_declared == 120


def test_load_groups_csv():
    text = (
        "id,name,description,city,visibility,members\n"
        'g1,"Data, Science Dublin",Talks,Dublin,public,40\n'
        "g2,Yoga,,Cork,private,\n"
    )
    groups = {g.group_id: g for g in DataLoader.load_groups(as_stream(text), "csv")}

    assert groups["g1"].name == "Data, Science Dublin"
    assert groups["g1"].member_count_declared == 40
    assert groups["g2"].member_count_declared is None
    assert groups["g2"].city == "Cork"


# ==================== load_memberships ====================

def test_load_memberships_merges_duplicates():
    text = "user_id,group_id\nu1,g1\nu2,g1\nu1,g1\n"
    memberships = DataLoader.load_memberships(as_stream(text), "csv")
    assert memberships == {MembershipRecord("u1", "g1"), MembershipRecord("u2", "g1")}


def test_load_memberships_empty_input():
    assert DataLoader.load_memberships(as_stream(""), "csv") == set()
    assert DataLoader.load_memberships(as_stream([]), "json") == set()


def test_load_memberships_empty_user_id_names_row():
    with pytest.raises(DataError, match="row 1"):
        DataLoader.load_memberships(as_stream([
            {"user_id": "u1", "group_id": "g1"},
            {"user_id": "", "group_id": "g1"},
        ]), "json")


def test_load_memberships_idempotent_under_duplication():
    rows = "u1,g1\nu2,g1\nu3,g2\n"
    once = DataLoader.load_memberships(as_stream("user_id,group_id\n" + rows), "csv")
    twice = DataLoader.load_memberships(as_stream("user_id,group_id\n" + rows + rows), "csv")
    assert once == twice


# ==================== dataset ====================

def test_dataset_members_of():
    ds = make_dataset(
        [("g1", "Dublin", Visibility.PUBLIC), ("g2", "Dublin", Visibility.PUBLIC)],
        [("u1", "g1"), ("u2", "g1")],
    )
    assert ds.members_of == {"g1": frozenset({"u1", "u2"}), "g2": frozenset()}
    assert ds.user_count == 2


def test_dataset_rejects_unknown_group():
    with pytest.raises(DataError, match="g9"):
        make_dataset([("g1", "Dublin", Visibility.PUBLIC)], [("u1", "g9")])


# ==================== filter_dataset ====================

def test_filter_city_case_insensitive():
    ds = make_dataset(
        [("g1", "Dublin", Visibility.PUBLIC), ("g2", "Cork", Visibility.PUBLIC), ("g3", "dublin", Visibility.PUBLIC)],
        [("u1", "g1"), ("u1", "g2"), ("u2", "g3")],
    )
    filtered = DataLoader.filter_dataset(ds, city="Dublin")

    assert set(filtered.groups) == {"g1", "g3"}
    assert all(m.group_id in filtered.groups for m in filtered.memberships)


def test_filter_public_only_on_private_dataset():
    ds = make_dataset(
        [("g1", "Dublin", Visibility.PRIVATE), ("g2", "Dublin", Visibility.PRIVATE)],
        [("u1", "g1"), ("u2", "g2")],
    )
    filtered = DataLoader.filter_dataset(ds, public_only=True)
    assert filtered.groups == {}
    assert filtered.memberships == frozenset()


def test_filter_min_members():
    ds = make_dataset(
        [("g1", "Dublin", Visibility.PUBLIC), ("g2", "Dublin", Visibility.PUBLIC)],
        [("u1", "g1"), ("u2", "g1"), ("u3", "g2")],
    )
    filtered = DataLoader.filter_dataset(ds, min_members=2)

    assert set(filtered.groups) == {"g1"}
    assert MembershipRecord("u3", "g2") not in filtered.memberships


def test_filter_is_monotone(sample_dataset):
    base = DataLoader.filter_dataset(sample_dataset, min_members=20)
    stricter = DataLoader.filter_dataset(sample_dataset, min_members=20, public_only=True, city="dublin")
    assert set(stricter.groups) <= set(base.groups)


def test_filter_keeps_referential_integrity(sample_dataset):
    filtered = DataLoader.filter_dataset(sample_dataset, min_members=30)
    assert all(m.group_id in filtered.groups for m in filtered.memberships)
    for gid, members in filtered.members_of.items():
        assert members == sample_dataset.members_of[gid]


# ==================== sample data / saving ====================

def test_generate_sample_data_is_deterministic():
    a = DataLoader.generate_sample_data(n_groups=12, n_users=50, n_topics=2, seed=3)
    b = DataLoader.generate_sample_data(n_groups=12, n_users=50, n_topics=2, seed=3)

    assert len(a.groups) == 12
    assert a.groups == b.groups
    assert a.memberships == b.memberships


def test_generate_sample_data_private_fraction():
    ds = DataLoader.generate_sample_data(n_groups=20, n_users=40, private_fraction=0.25, seed=1)
    private = [g for g in ds.groups.values() if g.visibility == Visibility.PRIVATE]
    assert len(private) == 5


def test_save_and_load_dataset(tmp_path, sample_dataset):
    groups_path = tmp_path / "groups.csv"
    memberships_path = tmp_path / "memberships.json"
    DataLoader.save_dataset(sample_dataset, str(groups_path), str(memberships_path))

    loaded = DataLoader.load_dataset(str(groups_path), str(memberships_path))
    assert loaded.groups == sample_dataset.groups
    assert loaded.memberships == sample_dataset.memberships


def test_load_dataset_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="groups.json"):
        DataLoader.load_dataset(str(tmp_path / "groups.json"), str(tmp_path / "memberships.csv"))
