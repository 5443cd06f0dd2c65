"""
Configuration file for the Meetup co-membership network toolkit

Every value here is a default. A pipeline config file (KEY=VALUE, same names)
overrides these, and command-line flags override the file.
"""
from typing import List

VERSION = "0.1.0"

# ==================== INPUT ====================

GROUPS_PATH = "data/groups.json"          # groups file (.json or .csv)
MEMBERSHIPS_PATH = "data/memberships.csv" # memberships file (.json or .csv)

# ==================== FILTERS ====================

CITY = ""                 # empty = keep every city (case-insensitive match)
PUBLIC_ONLY = True        # drop private groups
MIN_MEMBERS = 0           # drop groups with fewer registered members

# ==================== PROJECTION ====================

MIN_WEIGHT = 0.0          # keep edges with Jaccard weight strictly above this
WEIGHT_THRESHOLDS: List[float] = [0.01, 0.05, 0.1, 0.25, 0.5]

# ==================== CENTRALITY ====================

EIGENVECTOR_TOL = 1e-10
EIGENVECTOR_MAX_ITER = 10_000
DISTANCE_MODE = "inverse_weight"   # "inverse_weight" (d = 1/w) or "unit"
NORMALIZE_BETWEENNESS = True
TOP_K = 10                         # rows shown in ranked listings
COMMUNITY_TOP_K = 3                # most central members per community

# ==================== COMMUNITY DETECTION ====================

RESOLUTION = 0.1          # significance threshold, sensible range [0.01, 0.5]
MIN_SIZE = 5              # communities below this are discarded
N_TRIALS = 10
CONSENSUS_FRACTION = 0.5  # share of trials a community must appear in
MATCH_JACCARD = 0.5       # cross-trial matching threshold
DEDUP_JACCARD = 0.8       # near-duplicate collapse threshold
RNG_SEED = 42
MAX_CLEANUP_ITERS = 50
N_WORKERS = 1             # threads used for independent trials

# Resolution sweep (resolution_sweep.py)
SWEEP_RESOLUTIONS: List[float] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5]

# ==================== LABELLING ====================

LABEL_TERMS = 10          # t, terms per label
STOPWORDS_PATH = "stopwords.txt"
EXTRA_STOPWORDS = ""      # comma-separated, e.g. "dublin"
MIN_TERM_LENGTH = 2

# ==================== OUTPUT ====================

OUTPUT_DIR = "output"
EXPORT_FORMATS: List[str] = ["graphml", "json", "tsv"]   # subset of graphml, gexf, json, tsv
INTRA_COMMUNITY_ONLY = False
PLOT_STATS = False        # write weight_distribution.png during the stats stage

# ==================== LOGGING ====================

LOG_LEVEL = "INFO"        # DEBUG, INFO, WARNING, ERROR
LOG_TO_FILE = True
LOG_FILE = "meetupnet.log"
SHOW_PROGRESS = False     # tqdm progress bars for long loops
