import os
import logging
from dotenv import load_dotenv

load_dotenv()

__version__ = "0.4.0"

# Global Settings
THREADS = int(os.getenv("HDG_THREADS", str(os.cpu_count() or 1)))
LOG_LEVEL = os.getenv("HDG_LOG_LEVEL", "INFO")
OUTPUT_DIR = os.getenv("HDG_OUTPUT_DIR", "runs")
CHUNK_BUDGET = int(os.getenv("HDG_CHUNK_BUDGET", "2000000"))  # floats per Monte-Carlo chunk

# Geometry
BOUNDARY_TOL = 1e-9
ELLIPSOID_TOL = 1e-10
ELLIPSOID_MAX_ITER = 200

# Monte Carlo sample budgets (per subcommand default)
MC_SAMPLES = 100_000
MC_MIN_SAMPLES = 100

# Spectra
SYNTHESIS_DISTRIBUTION = "gaussian"  # "gaussian" | "laplace"
SPECTRA_SAMPLES_PER_LEVEL = 50

# Landscape
SEARCH_HALF_WIDTH = 5.0
STARTS_PER_MONOMIAL = 10  # starts = 10 * C(n+d, d), floored at 100
NEWTON_MAX_ITER = 100
CRITICAL_TOL = 1e-8
DEDUP_RADIUS = 1e-6
DEGENERATE_EIG_RTOL = 1e-8
RELU_GRID_POINTS = 100_001

# LID
LID_QUERY_CAP = 500

# Adversarial
OVERSHOOT = 1e-9
MLP_WIDTH = 64
SGD_LR = 0.05
SGD_MOMENTUM = 0.9
SGD_BATCH = 32
SGD_EPOCHS = 200
MIN_VALIDATION_ACCURACY = 0.9
SEARCH_TOL = 1e-4
REFINE_ROUNDS = 50
ASCENT_TARGET_CONFIDENCE = 0.99


def setup_logging(level=None):
    """Configure the root logger once; engines log as [Name] message."""
    logging.basicConfig(
        level=(level or LOG_LEVEL).upper(),
        format="%(asctime)s [%(name)s] %(message)s",
        datefmt="%H:%M:%S",
    )
