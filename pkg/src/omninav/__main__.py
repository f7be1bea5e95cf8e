import sys

from omninav.cli import main

sys.exit(main())
