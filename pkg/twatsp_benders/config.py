"""
Configuration module for the TWATSP-ST Benders solver.

Contains numerical tolerances, model defaults, and solver limits. Every value can be
overridden through the environment or a local `.env` file.
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# LP engine
FEAS_TOL = float(os.getenv("TWATSP_FEAS_TOL", "1e-7"))
OPT_TOL = float(os.getenv("TWATSP_OPT_TOL", "1e-7"))
PIVOT_TOL = float(os.getenv("TWATSP_PIVOT_TOL", "1e-9"))
REFACTOR_EVERY = int(os.getenv("TWATSP_REFACTOR_EVERY", "100"))
STALL_LIMIT = int(os.getenv("TWATSP_STALL_LIMIT", "50"))

# Penalty weights and travel-time disruption (sigma, phi, psi / cov, eta)
SIGMA = float(os.getenv("TWATSP_SIGMA", "1"))
PHI = float(os.getenv("TWATSP_PHI", "3"))
PSI = float(os.getenv("TWATSP_PSI", "4"))
COV = float(os.getenv("TWATSP_COV", "0.25"))
ETA = float(os.getenv("TWATSP_ETA", "0.35"))

# Branch-and-cut
TIME_LIMIT = float(os.getenv("TWATSP_TIME_LIMIT", "120"))
NODE_LIMIT = int(os.getenv("TWATSP_NODE_LIMIT", "100000"))
GAP_TOL = float(os.getenv("TWATSP_GAP_TOL", "1e-6"))
CUT_TOL = float(os.getenv("TWATSP_CUT_TOL", "1e-6"))
ROOT_CUT_ROUNDS = int(os.getenv("TWATSP_ROOT_CUT_ROUNDS", "30"))
WORKERS = int(os.getenv("TWATSP_WORKERS", "1"))

# Scenario retention
FRAC_ACTUAL = float(os.getenv("TWATSP_FRAC_ACTUAL", "0.10"))
FRAC_ARTIFICIAL = float(os.getenv("TWATSP_FRAC_ARTIFICIAL", "0.05"))
CLUSTER_RESTARTS = int(os.getenv("TWATSP_CLUSTER_RESTARTS", "50"))
EXACT_PARTITION_LIMIT = int(os.getenv("TWATSP_EXACT_PARTITION_LIMIT", "20000"))
V_ROW_NODE_LIMIT = int(os.getenv("TWATSP_V_ROW_NODE_LIMIT", "10000"))
V_ROW_TIME_LIMIT = float(os.getenv("TWATSP_V_ROW_TIME_LIMIT", "30"))

# Oracle
ORACLE_MAX_N = int(os.getenv("TWATSP_ORACLE_MAX_N", "8"))

LOG_LEVEL = os.getenv("TWATSP_LOG_LEVEL", "WARNING")
