import sys

from encommons.cli import main

if __name__ == "__main__":
    sys.exit(main())
