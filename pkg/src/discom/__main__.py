import sys

from discom.cli import main

sys.exit(main())
