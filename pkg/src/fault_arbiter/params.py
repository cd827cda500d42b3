from pathlib import Path


PROJECT_ROOT = Path(__file__).parent.parent.parent.resolve()

EXAMPLE_CONFIG_FILE = PROJECT_ROOT / "fault_arbiter.example.toml"

ENV_PREFIX = "FAULT_ARBITER_"
API_KEY_ENV_VAR = f"{ENV_PREFIX}API_KEY"

# Signal files: "<magic> <version> <sample_rate> <shaft_freq> <n_samples>\n" + float32 LE
SIGNAL_FILE_MAGIC = "FASIG"
SIGNAL_FILE_VERSION = 1
SIGNAL_FILE_SUFFIX = ".sig"

MODEL_FORMAT_VERSION = 1
BUNDLE_FORMAT_VERSION = 1

PROBABILITY_FLOOR = 1e-12
COVERAGE_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)

# Samples per side excluded from envelope statistics (filter and Hilbert edge effects)
ENVELOPE_EDGE_GUARD = 256
