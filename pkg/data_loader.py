"""
Data Loader for Meetup affiliation data

Supports:
- groups and memberships as JSON arrays shaped like the meetup.com API responses
- the equivalent CSV files (header row, UTF-8, RFC-4180 quoting)
- synthetic city datasets with planted topic communities
"""
import io
import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

GROUP_COLUMNS = ["id", "name", "description", "city", "visibility", "members"]
MEMBERSHIP_COLUMNS = ["user_id", "group_id"]


class DataError(ValueError):
    """Raised for malformed or inconsistent affiliation data"""


class Visibility(Enum):
    """Group visibility"""
    PUBLIC = "public"
    PRIVATE = "private"


@dataclass(frozen=True)
class GroupRecord:
    """One meetup group and its metadata"""
    group_id: str
    name: str
    description: str = ""
    city: str = ""
    visibility: Visibility = Visibility.PUBLIC
    member_count_declared: Optional[int] = None


@dataclass(frozen=True)
class MembershipRecord:
    """A user registered in a group"""
    user_id: str
    group_id: str


@dataclass
class AffiliationDataset:
    """
    Bipartite user-group structure plus group metadata

    `groups` is keyed by group id (sorted); `members_of` has an entry for every
    group, empty when nobody is registered.
    """
    groups: Dict[str, GroupRecord]
    memberships: FrozenSet[MembershipRecord]
    members_of: Dict[str, FrozenSet[str]] = field(init=False)

    def __post_init__(self):
        self.groups = {gid: self.groups[gid] for gid in sorted(self.groups)}
        self.memberships = frozenset(self.memberships)

        members: Dict[str, Set[str]] = {gid: set() for gid in self.groups}
        for record in self.memberships:
            if record.group_id not in members:
                raise DataError(f"Membership references unknown group: {record.group_id!r}")
            members[record.group_id].add(record.user_id)
        self.members_of = {gid: frozenset(users) for gid, users in members.items()}

    @classmethod
    def build(
        cls,
        groups: Iterable[GroupRecord],
        memberships: Iterable[MembershipRecord]
    ) -> "AffiliationDataset":
        """
        Assemble a dataset from loaded records

        Args:
            groups: Group records (ids must be unique)
            memberships: Membership records (duplicates merge)

        Returns:
            AffiliationDataset
        """
        by_id: Dict[str, GroupRecord] = {}
        for record in groups:
            if record.group_id in by_id:
                raise DataError(f"Duplicate group id: {record.group_id!r}")
            by_id[record.group_id] = record
        return cls(groups=by_id, memberships=frozenset(memberships))

    @property
    def user_count(self) -> int:
        return len({m.user_id for m in self.memberships})

    def summary(self) -> Dict[str, int]:
        return {
            "groups": len(self.groups),
            "users": self.user_count,
            "memberships": len(self.memberships),
        }


def _read_text(source: BinaryIO) -> str:
    data = source.read()
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataError(f"Input is not valid UTF-8: {e}") from e


def _read_records(source: BinaryIO, fmt: str, columns: List[str]) -> List[Dict[str, object]]:
    """Decode a JSON array or a CSV file into a list of dicts"""
    text = _read_text(source)
    fmt = fmt.lower()

    if fmt == "json":
        if not text.strip():
            return []
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise DataError(f"Invalid JSON: {e}") from e
        if not isinstance(payload, list):
            raise DataError("Expected a JSON array of records")
        return payload

    if fmt == "csv":
        if not text.strip():
            return []
        df = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
        df.columns = [str(col).strip() for col in df.columns]
        unknown = [col for col in df.columns if col not in columns]
        if unknown:
            raise DataError(f"Unexpected CSV columns: {unknown}")
        return df.to_dict("records")

    raise DataError(f"Unsupported format: {fmt!r} (expected 'json' or 'csv')")


def _as_id(value: object) -> str:
    if value is None:
        return ""
    return str(value).strip()


def _as_count(value: object) -> int:
    """Whole non-negative number from JSON or CSV; raises ValueError otherwise"""
    if isinstance(value, bool):
        raise ValueError("boolean")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError("fractional")
        count = int(value)
    elif isinstance(value, int):
        count = value
    elif isinstance(value, str):
        count = int(value.strip())
    else:
        raise ValueError(type(value).__name__)
    if count < 0:
        raise ValueError("negative")
    return count


def format_for_path(path: str) -> str:
    """Infer 'json' or 'csv' from a file suffix; a trailing .partial is ignored"""
    if path.endswith(".partial"):
        path = path[:-len(".partial")]
    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        return "csv"
    raise DataError(f"Cannot infer format from file name: {path}")


class DataLoader:
    """
    Load, validate and filter raw affiliation data
    """

    @staticmethod
    def load_groups(source: BinaryIO, fmt: str = "json") -> Set[GroupRecord]:
        """
        Load group records

        Expected keys: id, name, description (optional), city (optional),
        visibility (optional, "public"|"private"), members (optional integer)

        Args:
            source: Readable byte stream
            fmt: 'json' or 'csv'

        Returns:
            Set of GroupRecord, one per distinct id
        """
        records = _read_records(source, fmt, GROUP_COLUMNS)
        groups: Dict[str, GroupRecord] = {}

        for index, raw in enumerate(records):
            if not isinstance(raw, dict):
                raise DataError(f"Group record {index}: expected an object")

            group_id = _as_id(raw.get("id"))
            name = raw.get("name")
            if not group_id:
                raise DataError(f"Group record {index}: missing 'id'")
            if name is None or str(name).strip() == "":
                raise DataError(f"Group record {index}: missing 'name'")
            if group_id in groups:
                raise DataError(f"Duplicate group id: {group_id!r}")

            visibility_raw = str(raw.get("visibility") or "public").strip().lower()
            try:
                visibility = Visibility(visibility_raw)
            except ValueError:
                raise DataError(
                    f"Group record {index}: invalid visibility {visibility_raw!r}"
                ) from None

            members_raw = raw.get("members")
            member_count = None
            if members_raw not in (None, ""):
                try:
                    member_count = _as_count(members_raw)
                except ValueError:
                    raise DataError(
                        f"Group record {index}: 'members' must be a non-negative integer, "
                        f"got {members_raw!r}"
                    ) from None

            groups[group_id] = GroupRecord(
                group_id=group_id,
                name=str(name),
                description=str(raw.get("description") or ""),
                city=str(raw.get("city") or ""),
                visibility=visibility,
                member_count_declared=member_count,
            )

        logger.debug("Loaded %d group records", len(groups))
        return set(groups.values())

    @staticmethod
    def load_memberships(source: BinaryIO, fmt: str = "csv") -> Set[MembershipRecord]:
        """
        Load (user_id, group_id) pairs; exact duplicates merge silently

        Args:
            source: Readable byte stream
            fmt: 'json' or 'csv'

        Returns:
            Deduplicated set of MembershipRecord
        """
        records = _read_records(source, fmt, MEMBERSHIP_COLUMNS)
        memberships: Set[MembershipRecord] = set()

        for index, raw in enumerate(records):
            if not isinstance(raw, dict):
                raise DataError(f"Membership row {index}: expected an object")
            user_id = _as_id(raw.get("user_id"))
            group_id = _as_id(raw.get("group_id"))
            if not user_id:
                raise DataError(f"Membership row {index}: empty user_id")
            if not group_id:
                raise DataError(f"Membership row {index}: empty group_id")
            memberships.add(MembershipRecord(user_id=user_id, group_id=group_id))

        logger.debug("Loaded %d distinct memberships (%d rows)", len(memberships), len(records))
        return memberships

    @staticmethod
    def load_dataset(groups_path: str, memberships_path: str) -> AffiliationDataset:
        """
        Load both files from disk, inferring the format from each suffix

        Args:
            groups_path: Path to groups .json/.csv
            memberships_path: Path to memberships .json/.csv

        Returns:
            AffiliationDataset
        """
        for path in (groups_path, memberships_path):
            if not os.path.exists(path):
                raise FileNotFoundError(f"Data file not found: {path}")

        with open(groups_path, "rb") as f:
            groups = DataLoader.load_groups(f, format_for_path(groups_path))
        with open(memberships_path, "rb") as f:
            memberships = DataLoader.load_memberships(f, format_for_path(memberships_path))

        return AffiliationDataset.build(groups, memberships)

    @staticmethod
    def filter_dataset(
        ds: AffiliationDataset,
        city: Optional[str] = None,
        public_only: bool = False,
        min_members: int = 0
    ) -> AffiliationDataset:
        """
        Keep groups satisfying every enabled predicate

        Args:
            ds: Source dataset
            city: Case-insensitive exact city match (None or "" disables)
            public_only: Drop private groups
            min_members: Minimum number of registered members

        Returns:
            Filtered dataset; memberships of dropped groups are removed
        """
        if min_members < 0:
            raise DataError("min_members must be non-negative")

        wanted_city = city.strip().casefold() if city else None
        kept: Dict[str, GroupRecord] = {}

        for gid, group in ds.groups.items():
            if wanted_city is not None and group.city.strip().casefold() != wanted_city:
                continue
            if public_only and group.visibility != Visibility.PUBLIC:
                continue
            if len(ds.members_of[gid]) < min_members:
                continue
            kept[gid] = group

        memberships = frozenset(m for m in ds.memberships if m.group_id in kept)
        filtered = AffiliationDataset(groups=kept, memberships=memberships)

        logger.info(
            "Filtered dataset: %d -> %d groups, %d -> %d memberships",
            len(ds.groups), len(kept), len(ds.memberships), len(memberships)
        )
        return filtered

    @staticmethod
    def save_dataset(ds: AffiliationDataset, groups_path: str, memberships_path: str):
        """
        Write a dataset in the same formats the loaders read

        Args:
            ds: Dataset to save
            groups_path: Output path (.json or .csv)
            memberships_path: Output path (.json or .csv)
        """
        group_rows = [
            {
                "id": g.group_id,
                "name": g.name,
                "description": g.description,
                "city": g.city,
                "visibility": g.visibility.value,
                "members": g.member_count_declared,
            }
            for g in ds.groups.values()
        ]
        membership_rows = [
            {"user_id": m.user_id, "group_id": m.group_id}
            for m in sorted(ds.memberships, key=lambda m: (m.group_id, m.user_id))
        ]

        _write_rows(group_rows, groups_path, GROUP_COLUMNS)
        _write_rows(membership_rows, memberships_path, MEMBERSHIP_COLUMNS)
        logger.info("Dataset saved to: %s, %s", groups_path, memberships_path)

    @staticmethod
    def generate_sample_data(
        n_groups: int = 30,
        n_users: int = 400,
        n_topics: int = 3,
        groups_per_user: Tuple[int, int] = (2, 5),
        cross_topic_prob: float = 0.1,
        private_fraction: float = 0.0,
        city: str = "Dublin",
        seed: int = 42
    ) -> AffiliationDataset:
        """
        Generate a synthetic city with planted topic communities

        Groups are dealt round-robin to topics. Each user has a home topic and
        joins a random number of groups, each drawn from the home topic unless a
        cross-topic draw happens.

        Args:
            n_groups: Number of groups
            n_users: Number of users
            n_topics: Number of planted topics
            groups_per_user: Inclusive (min, max) memberships per user
            cross_topic_prob: Probability that a membership ignores the home topic
            private_fraction: Fraction of groups marked private
            city: City written on every group
            seed: Random seed

        Returns:
            AffiliationDataset
        """
        if n_topics < 1 or n_groups < n_topics:
            raise DataError("Need at least one group per topic")

        rng = np.random.default_rng(seed)
        topics = [SAMPLE_TOPICS[i % len(SAMPLE_TOPICS)] for i in range(n_topics)]
        topic_of = [i % n_topics for i in range(n_groups)]
        by_topic: List[np.ndarray] = [
            np.array([g for g in range(n_groups) if topic_of[g] == t]) for t in range(n_topics)
        ]

        groups: List[GroupRecord] = []
        private = set(rng.choice(n_groups, size=int(round(private_fraction * n_groups)), replace=False))
        for g in range(n_groups):
            words = topics[topic_of[g]]
            picked = rng.choice(len(words), size=2, replace=False)
            name = f"{city} {words[picked[0]].title()} {words[picked[1]].title()} Meetup"
            description_words = list(rng.choice(words, size=6)) + list(rng.choice(GENERIC_WORDS, size=4))
            groups.append(GroupRecord(
                group_id=f"g{g:04d}",
                name=name,
                description=" ".join(description_words).capitalize() + ".",
                city=city,
                visibility=Visibility.PRIVATE if g in private else Visibility.PUBLIC,
            ))

        lo, hi = groups_per_user
        memberships: Set[MembershipRecord] = set()
        for u in range(n_users):
            home = int(rng.integers(n_topics))
            k = int(rng.integers(lo, hi + 1))
            for _ in range(k):
                if rng.random() < cross_topic_prob:
                    g = int(rng.integers(n_groups))
                else:
                    g = int(rng.choice(by_topic[home]))
                memberships.add(MembershipRecord(user_id=f"u{u:05d}", group_id=f"g{g:04d}"))

        ds = AffiliationDataset.build(groups, memberships)
        logger.info(
            "Generated %d groups, %d users, %d memberships across %d topics",
            len(ds.groups), ds.user_count, len(ds.memberships), n_topics
        )
        return ds


def _write_rows(rows: List[Dict[str, object]], path: str, columns: List[str]):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    fmt = format_for_path(path)
    if fmt == "json":
        cleaned = [{k: v for k, v in row.items() if v is not None} for row in rows]
        with open(path, "w", encoding="utf-8") as f:
            json.dump(cleaned, f, ensure_ascii=False, indent=1)
    else:
        df = pd.DataFrame(rows, columns=columns)
        if "members" in df.columns:
            df["members"] = df["members"].map(lambda v: "" if v is None or pd.isna(v) else str(int(v)))
        df.to_csv(path, index=False, encoding="utf-8")


SAMPLE_TOPICS: List[List[str]] = [
    ["data", "python", "cloud", "devops", "security", "js", "machine", "learning", "startup", "developers"],
    ["hiking", "walking", "climbing", "trail", "adventure", "outdoors", "camping", "cycling", "running", "kayak"],
    ["yoga", "meditation", "healing", "mindfulness", "wellness", "spiritual", "breathwork", "reiki", "health", "self"],
    ["language", "english", "spanish", "french", "exchange", "conversation", "culture", "travel", "international", "friends"],
    ["music", "singing", "rock", "jazz", "choir", "guitar", "dance", "salsa", "tango", "concerts"],
    ["business", "marketing", "entrepreneurs", "digital", "networking", "sales", "founders", "innovation", "growth", "leadership"],
    ["boardgames", "chess", "cards", "strategy", "tabletop", "roleplaying", "puzzles", "trivia", "quiz", "games"],
]

GENERIC_WORDS = ["join", "us", "monthly", "events", "friendly", "community", "everyone", "welcome", "share", "fun"]


if __name__ == "__main__":
    # Example: generate and save a small sample city
    print("Generating sample affiliation data...")

    ds = DataLoader.generate_sample_data(n_groups=30, n_users=400, n_topics=3, seed=42)

    os.makedirs("data", exist_ok=True)
    DataLoader.save_dataset(ds, "data/groups.json", "data/memberships.csv")

    print("\nData summary:")
    for key, value in ds.summary().items():
        print(f"  {key}: {value}")
