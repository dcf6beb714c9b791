import sys

from gesture_imputer.cli import main

sys.exit(main())
