import sys

from agingdict.cli import main

sys.exit(main())
