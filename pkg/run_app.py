import os
import sys
from src.matdist.main import main

if __name__ == "__main__":
    os.environ['PYTHONIOENCODING'] = 'utf-8'
    sys.exit(main())
