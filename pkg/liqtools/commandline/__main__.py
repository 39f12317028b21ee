import sys

from liqtools.commandline import main

sys.exit(main())
