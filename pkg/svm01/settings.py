# svm01/settings.py
import os

from dotenv import load_dotenv

# 🔹 Load environment variables
load_dotenv()

LOG_LEVEL = os.getenv("SVM01_LOG_LEVEL", "INFO").upper()
DEFAULT_JOBS = int(os.getenv("SVM01_JOBS", "1"))
DEFAULT_SEED = int(os.getenv("SVM01_SEED", "0"))
ZERO_TOL = float(os.getenv("SVM01_ZERO_TOL", "1e-8"))

# set-membership slack for fixed-point checks
DEFAULT_TOL = 1e-9
