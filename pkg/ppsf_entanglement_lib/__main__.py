import sys

from .config_and_parser import main

if __name__ == "__main__":
    sys.exit(main())
