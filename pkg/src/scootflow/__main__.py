import sys

from scootflow.cli import main

sys.exit(main())
