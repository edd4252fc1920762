import sys

from algocollusion.cli import main

sys.exit(main())
