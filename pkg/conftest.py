# Puts the repository root on sys.path so tests import core/, systems/, states/ and utils/ directly.
