import sys

from usfkit.cli import main

sys.exit(main())
