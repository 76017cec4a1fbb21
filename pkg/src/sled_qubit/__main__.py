import sys

from sled_qubit.harness.cli import main

sys.exit(main())
