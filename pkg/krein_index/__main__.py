import sys

from krein_index.cli import main

sys.exit(main())
