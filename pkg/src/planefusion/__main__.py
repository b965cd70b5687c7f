import sys

from planefusion.cli import main

sys.exit(main())
