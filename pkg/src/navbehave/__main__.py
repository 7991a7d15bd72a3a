import sys

from navbehave.cli import main

sys.exit(main())
