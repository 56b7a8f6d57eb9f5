import sys
from pathlib import Path

# make `import helpers` work regardless of how pytest is invoked
sys.path.insert(0, str(Path(__file__).parent))
