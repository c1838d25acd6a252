import sys

from megaroot.cli import main

sys.exit(main())
