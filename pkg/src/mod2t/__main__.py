import sys

from mod2t.cli import main

sys.exit(main())
