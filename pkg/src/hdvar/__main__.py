import sys

from hdvar.cli import main

sys.exit(main())
