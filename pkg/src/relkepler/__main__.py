"""Allow ``python -m relkepler``."""

import sys

from .cli import main

sys.exit(main())
