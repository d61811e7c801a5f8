#
# R A V E N B E N C H
#
# Constants, keywords and default values.
#
#
import os
import logging
from collections.abc import MutableMapping
from enum import Enum

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


# ##############################################################
# A few constants and default values
# Adjust with care...
#
# These are mainly used inside Ravenbench and should not be changed.
# Anything a run may want to change is in RAVENBENCH_DEFAULT_VALUES
# and can be overridden from a config file or the command line.
#
# File & folder names
MANIFEST_FILE = "manifest.json"
REPORT_FILE = "report.json"
CURVES_FILE = "curves.csv"
SCORES_FILE = "scores.csv"
EXTERNAL_MANIFEST_SUFFIX = ".manifest.json"

# Panels
PANEL_SIZE = 64  # px
SHEET_MARGIN = 4  # px
NUM_CONTEXT = 8
NUM_ANSWERS = 6
GRID_SIDE = 3

# Generation
MAX_REJECTIONS = 10_000
MAX_REGENERATIONS = 100
RNG_ALGORITHM = "philox"

# Space enumeration for metrics is exhaustive below that size, sampled above.
FULL_SPACE_LIMIT = 1_000_000

# WReN protocol
CHECKPOINT_STEPS = (1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000)

# internals
ID_SEP = "/"
OPTION_SEP = ":"


class SPACE_ID(Enum):
    DSPRITES_REASONING = "dsprites_reasoning"
    DSPRITES_FULL = "dsprites_full"
    SHAPES3D_REASONING = "shapes3d_reasoning"
    SHAPES3D_FULL = "shapes3d_full"


class SOURCE_KIND(Enum):
    GT_INTEGER = "gt_integer"
    GT_ONEHOT = "gt_onehot"
    PERMUTED_SCALED = "permuted_scaled"
    LINEAR_MIXED = "linear_mixed"
    EXTERNAL = "external"


class METRIC(Enum):
    BETA_VAE = "beta_vae"
    FACTOR_VAE = "factor_vae"
    MIG = "mig"
    SAP = "sap"
    DCI_DISENTANGLEMENT = "dci_disentanglement"
    LR_INFORMATIVENESS = "lr_informativeness"
    GBT_INFORMATIVENESS = "gbt_informativeness"


# Score columns coming from outside (decoder-based), never computed here.
RECONSTRUCTION = "reconstruction"

# The five disentanglement scores (without the two informativeness scores), selected as "disentanglement"
DISENTANGLEMENT = "disentanglement"
DISENTANGLEMENT_METRICS = [
    METRIC.BETA_VAE.value,
    METRIC.FACTOR_VAE.value,
    METRIC.MIG.value,
    METRIC.SAP.value,
    METRIC.DCI_DISENTANGLEMENT.value,
]


# Config file and command line keywords
#
class CONFIG_KW(Enum):
    BATCH = "batch"
    CONFIG_SEED = "config-seed"
    COUNT = "count"
    EVAL_BATCHES = "eval-batches"
    EVAL_EVERY = "eval-every"
    FORCE = "force"
    GEN_SEED = "gen-seed"
    JOBS = "jobs"
    LEVELS = "levels"
    METRIC_PARAMS = "metric-params"
    METRICS = "metrics"
    MIX_SEED = "mix-seed"
    NO_POSITION_TAGS = "no-position-tags"
    RAW_ROWS = "raw-rows"
    REPR = "repr"
    SEED = "seed"
    SEEDS = "seeds"
    SPACE = "space"
    STEPS = "steps"
    STRICT = "strict"
    WITH_BASELINES = "with-baselines"
    WREN_CONFIGS = "wren-configs"


# System default values
RAVENBENCH_DEFAULT_VALUES = {
    CONFIG_KW.BATCH.value: 32,
    CONFIG_KW.CONFIG_SEED.value: 0,
    CONFIG_KW.COUNT.value: 10,
    CONFIG_KW.EVAL_BATCHES.value: 100,
    CONFIG_KW.EVAL_EVERY.value: 1_000,
    CONFIG_KW.GEN_SEED.value: 0,
    CONFIG_KW.JOBS.value: 1,
    CONFIG_KW.LEVELS.value: 5,
    CONFIG_KW.METRIC_PARAMS.value: {},
    CONFIG_KW.METRICS.value: "all",
    CONFIG_KW.MIX_SEED.value: 0,
    CONFIG_KW.NO_POSITION_TAGS.value: False,
    CONFIG_KW.SEED.value: 0,
    CONFIG_KW.SEEDS.value: 2,
    CONFIG_KW.SPACE.value: SPACE_ID.DSPRITES_REASONING.value,
    CONFIG_KW.STEPS.value: 100_000,
    CONFIG_KW.STRICT.value: False,
    CONFIG_KW.WITH_BASELINES.value: False,
    CONFIG_KW.WREN_CONFIGS.value: 3,
}


# ############################################################
#
#  Yaml run configuration reader
#
yaml = YAML(typ="safe", pure=True)

KNOWN_KEYS = {kw.value for kw in CONFIG_KW}


class Config(MutableMapping):
    """Run options read from a YAML file.

    Keys are the long command line option names. CONFIG_KW members and
    python-style names (eval_every) are accepted and stored as option names.
    A missing or unreadable file leaves the configuration empty.
    """

    def __init__(self, filename: str | None = None):
        self.store = dict()
        self.filename = None
        if filename is None:
            return
        if not os.path.exists(filename):
            logger.warning(f"no config file {filename}")
            return
        self.filename = os.path.abspath(filename)
        try:
            with open(self.filename, "r") as fp:
                loaded = yaml.load(fp)
        except YAMLError:
            logger.warning(f"config file {self.filename} could not be parsed", exc_info=True)
            return
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            logger.warning(f"config file {self.filename} is not a mapping of options, ignored")
            return
        for key, value in loaded.items():
            self[key] = value
        unknown = sorted(k for k in self.store if k not in KNOWN_KEYS)
        if len(unknown) > 0:
            logger.warning(f"config file {self.filename}: unknown options {unknown} ignored")
        logger.debug(f"loaded {len(self.store)} options from {self.filename}")

    def __getitem__(self, key):
        return self.store[self._keytransform(key)]

    def __setitem__(self, key, value):
        self.store[self._keytransform(key)] = value

    def __delitem__(self, key):
        del self.store[self._keytransform(key)]

    def __iter__(self):
        return iter(self.store)

    def __len__(self):
        return len(self.store)

    def _keytransform(self, key) -> str:
        if isinstance(key, Enum):
            key = key.value
        return key.replace("_", "-") if isinstance(key, str) else key

    def is_valid(self) -> bool:
        return len(self.store) > 0
