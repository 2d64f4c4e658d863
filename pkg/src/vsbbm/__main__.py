import sys

from vsbbm.runner import main

sys.exit(main())
