import os

# debug flag, RS_REPAIR_DEBUG=1 turns it on
DEBUG = os.environ.get("RS_REPAIR_DEBUG", "") not in ("", "0")
