import sys

from esnash.cli import main

sys.exit(main())
