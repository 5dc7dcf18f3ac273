import sys

from cul.cli import main

sys.exit(main())
