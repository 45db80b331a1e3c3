import sys

from crossnoise.cli import main

sys.exit(main())
