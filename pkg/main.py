# MAIN.PY
import logging
import sys

from svm01.settings import LOG_LEVEL

# ───────────────────────────────────────────────
# GLOBAL LOGGING CONFIG (before any svm01 logger fires)
# ───────────────────────────────────────────────
logging.basicConfig(
    level=LOG_LEVEL,
    format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
)

from cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
