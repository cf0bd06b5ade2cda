"""Test selector that never answers in time."""
import sys
import time

for _line in sys.stdin:
    time.sleep(5)
    print("too late", flush=True)
