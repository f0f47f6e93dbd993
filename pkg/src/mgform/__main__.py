import sys

from mgform.cli import main

sys.exit(main())
