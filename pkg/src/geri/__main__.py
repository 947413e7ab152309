import sys

from geri.cli import main

sys.exit(main())
