import sys

from rlforge.harness.cli import main

sys.exit(main())
