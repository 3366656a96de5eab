import sys

from PySubstructuring.cli import main

sys.exit(main())
