"""
Main entry point for face-rfcn.
"""
import sys

from dotenv import load_dotenv
from loguru import logger

from face_rfcn.cli import main

# Load environment variables
load_dotenv()


if __name__ == "__main__":
    logger.debug("Starting face-rfcn")
    sys.exit(main())
