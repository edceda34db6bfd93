"""Main program if called with `python -m droid`"""

from .cli import main

if __name__ == "__main__":
    main()
