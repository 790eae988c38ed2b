"""``python -m bpmnverify``."""

import sys

from .cli import main

sys.exit(main())
