import sys

from ordino.cli import main

sys.exit(main())
