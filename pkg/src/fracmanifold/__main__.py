import sys

from fracmanifold.cli import main

sys.exit(main())
