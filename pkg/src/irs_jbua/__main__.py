import sys

from irs_jbua.cli import main

sys.exit(main())
