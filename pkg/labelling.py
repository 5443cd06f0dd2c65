"""
Community labels from group names and descriptions

1. extract lowercase alphanumeric terms, dropping stopwords
2. count terms per group (group-term matrix)
3. log-TF-IDF weighting, rows scaled to unit length
4. average the rows of each community and keep the strongest terms
"""
import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set

import numpy as np
import pandas as pd
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

import config
from cover import Cover
from data_loader import DataError

logger = logging.getLogger(__name__)

# Runs of letters and digits; underscore is a word character but not alphanumeric
TOKEN_PATTERN = re.compile(r"[^\W_]+")


def load_stopwords(path: Optional[str] = None, extra: Iterable[str] = ()) -> FrozenSet[str]:
    """
    Read a stopword file: UTF-8, one word per line, '#' starts a comment

    Args:
        path: Stopword file (uses config.STOPWORDS_PATH if None)
        extra: Additional words, e.g. city names

    Returns:
        Lowercased word set
    """
    path = path or config.STOPWORDS_PATH
    if not os.path.exists(path):
        raise FileNotFoundError(f"Stopword file not found: {path}")

    words: Set[str] = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            word = line.split("#", 1)[0].strip().lower()
            if word:
                words.add(word)
    words.update(w.strip().lower() for w in extra if w.strip())
    logger.debug("Loaded %d stopwords from %s", len(words), path)
    return frozenset(words)


def tokenize(text: str, stopwords: FrozenSet[str] = frozenset(), min_len: int = None) -> Counter:
    """
    Lowercase, split on non-alphanumeric characters, drop stopwords and short tokens

    Args:
        text: Free text (may be empty)
        stopwords: Words to drop
        min_len: Minimum token length

    Returns:
        Counter of terms
    """
    min_len = config.MIN_TERM_LENGTH if min_len is None else min_len
    tokens = TOKEN_PATTERN.findall((text or "").lower())
    return Counter(t for t in tokens if len(t) >= min_len and t not in stopwords)


@dataclass
class TermMatrix:
    """Group-term matrix: raw counts, or TF-IDF weights once normalised"""
    rows: List[str]
    vocabulary: List[str]
    values: sparse.csr_matrix
    row_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.values = sparse.csr_matrix(self.values, dtype=float)
        if self.values.shape != (len(self.rows), len(self.vocabulary)):
            raise ValueError("Matrix shape does not match rows and vocabulary")
        self.row_index = {row: i for i, row in enumerate(self.rows)}

    def row(self, group_id: str) -> Dict[str, float]:
        """Nonzero entries of one row as term -> value"""
        values = self.values.getrow(self.row_index[group_id])
        return {self.vocabulary[j]: float(v) for j, v in zip(values.indices, values.data) if v != 0}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values.toarray(), index=self.rows, columns=self.vocabulary)


def build_term_matrix(
    docs: Mapping[str, str],
    stopwords: FrozenSet[str] = frozenset(),
    min_len: int = None
) -> TermMatrix:
    """
    Count terms per document

    Args:
        docs: group_id -> text
        stopwords: Words to drop
        min_len: Minimum token length

    Returns:
        TermMatrix of raw counts, rows in `docs` order, vocabulary sorted
    """
    rows = list(docs)
    if not rows:
        return TermMatrix([], [], sparse.csr_matrix((0, 0)))

    vectorizer = CountVectorizer(
        analyzer=lambda text: list(tokenize(text, stopwords, min_len).elements()),
        lowercase=False,
    )
    texts = [docs[row] or "" for row in rows]
    if not any(tokenize(text, stopwords, min_len) for text in texts):
        return TermMatrix(rows, [], sparse.csr_matrix((len(rows), 0)))

    counts = vectorizer.fit_transform(texts)
    vocabulary = list(vectorizer.get_feature_names_out())
    return TermMatrix(rows, vocabulary, counts)


def tfidf_normalize(m: TermMatrix) -> TermMatrix:
    """
    Weight (1 + ln tf) * ln(N / df) and scale nonzero rows to unit length

    A term present in every document gets weight 0.

    Args:
        m: Raw counts

    Returns:
        Weighted TermMatrix
    """
    n_docs = len(m.rows)
    weighted = m.values.copy().tocsr()
    weighted.eliminate_zeros()
    if n_docs == 0 or weighted.nnz == 0:
        return TermMatrix(list(m.rows), list(m.vocabulary), weighted)

    df = np.bincount(weighted.indices, minlength=len(m.vocabulary))
    idf = np.log(n_docs / np.maximum(df, 1))
    weighted.data = (1.0 + np.log(weighted.data)) * idf[weighted.indices]
    weighted.eliminate_zeros()
    weighted = normalize(weighted, norm="l2", axis=1)
    return TermMatrix(list(m.rows), list(m.vocabulary), weighted)


@dataclass
class LabelSet:
    """Ranked name and description terms per community id"""
    name_labels: Dict[int, List[str]]
    description_labels: Dict[int, List[str]]
    t: int

    def to_dict(self) -> Dict[str, Dict[str, List[str]]]:
        ids = sorted(set(self.name_labels) | set(self.description_labels))
        return {
            str(community_id): {
                "name_label": self.name_labels.get(community_id, []),
                "description_label": self.description_labels.get(community_id, []),
            }
            for community_id in ids
        }

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "community": int(community_id),
                "name_label": ", ".join(entry["name_label"]),
                "description_label": ", ".join(entry["description_label"]),
            }
            for community_id, entry in self.to_dict().items()
        ]
        return pd.DataFrame(rows, columns=["community", "name_label", "description_label"])


def top_terms(m: TermMatrix, members: Iterable[str], t: int) -> List[str]:
    """
    Strongest terms of the mean row over `members`

    Ordered by descending mean value, ties lexicographic; zero terms are never
    returned.
    """
    members = sorted(members)
    missing = [g for g in members if g not in m.row_index]
    if missing:
        raise DataError(f"Group {missing[0]!r} has no row in the term matrix")
    if not members or not m.vocabulary:
        return []

    rows = [m.row_index[g] for g in members]
    mean = np.asarray(m.values[rows].mean(axis=0)).ravel()
    # Last key is primary: -mean first, then the term itself
    order = np.lexsort((np.array(m.vocabulary, dtype=str), -mean))
    return [m.vocabulary[j] for j in order[:t] if mean[j] > 0]


def label_communities(
    name_matrix: TermMatrix,
    cover: Cover,
    t: int = None,
    description_matrix: Optional[TermMatrix] = None
) -> LabelSet:
    """
    Label each community from weighted name (and description) matrices

    Args:
        name_matrix: Weighted matrix built from group names
        cover: Cover whose nodes all have rows
        t: Terms per label
        description_matrix: Weighted matrix built from descriptions

    Returns:
        LabelSet keyed by community id
    """
    t = config.LABEL_TERMS if t is None else t
    if t < 1:
        raise ValueError("t must be at least 1")

    name_labels = {cid: top_terms(name_matrix, members, t) for cid, members in cover.items()}
    description_labels = {}
    if description_matrix is not None:
        description_labels = {cid: top_terms(description_matrix, members, t) for cid, members in cover.items()}
    return LabelSet(name_labels, description_labels, t)


def save_labels(labels: LabelSet, json_path: str, tsv_path: Optional[str] = None):
    """Write labels as JSON and optionally as a TSV table"""
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(labels.to_dict(), f, ensure_ascii=False, indent=1, sort_keys=True)
        f.write("\n")
    if tsv_path:
        labels.to_frame().to_csv(tsv_path, sep="\t", index=False, encoding="utf-8")
    logger.info("Labels for %d communities written to: %s", len(labels.name_labels), json_path)
