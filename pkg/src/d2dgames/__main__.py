import sys

from d2dgames.cli import main

sys.exit(main())
