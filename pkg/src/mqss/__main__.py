import sys

from mqss.harness.cli import main

sys.exit(main())
