"""
Start the estimation HTTP API.

    python run_app.py [--host 0.0.0.0] [--port 8000] [--reload]

Defaults come from Config (HOST, PORT, DEBUG).
"""
import argparse
import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))


def parse_args(argv=None):
    from app.config import Config

    parser = argparse.ArgumentParser(description=f"Run the {Config.APP_NAME}")
    parser.add_argument("--host", default=Config.HOST)
    parser.add_argument("--port", type=int, default=Config.PORT)
    parser.add_argument("--reload", action="store_true", default=Config.DEBUG, help="Reload on code changes")
    return parser.parse_args(argv)


if __name__ == "__main__":
    try:
        import uvicorn

        from app.config import Config
        from app.utils.logger import logger
    except ImportError as e:
        print(f"Error: {e}", file=sys.stderr)
        print("Install the dependencies first: pip install -r requirements.txt", file=sys.stderr)
        sys.exit(1)

    args = parse_args()
    logger.info(f"Starting the {Config.APP_NAME} on {args.host}:{args.port}")
    uvicorn.run("app.app:app", host=args.host, port=args.port, reload=args.reload, log_level="info")
