import sys

from surfreg.cli import main

sys.exit(main())
