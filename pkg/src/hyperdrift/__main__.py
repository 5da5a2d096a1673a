import sys

from hyperdrift.cli import main

sys.exit(main())
