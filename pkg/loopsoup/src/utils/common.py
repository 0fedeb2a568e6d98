import os
import json
from box.exceptions import BoxValueError
import yaml
from ensure import ensure_annotations
from box import ConfigBox
from pathlib import Path
from typing import Any
from loopsoup.src.utils.exception import LoopSoupException, EXIT_IO
from loopsoup.src.utils.logger import logger


def get_project_root() -> Path:
    """
    Returns the project root directory (the one holding pyproject.toml).
    """
    return Path(__file__).parent.parent.parent.parent


def resolve_path(path: Path) -> Path:
    """Resolve a relative path against the project root."""
    path = Path(path)
    return path if path.is_absolute() else get_project_root() / path


@ensure_annotations
def read_yaml(path_to_yaml: Path) -> ConfigBox:
    """
    Reads a YAML file and returns its contents as a ConfigBox object.

    Args:
        path_to_yaml (Path): Path to the YAML file, relative to the project root or absolute.

    Returns:
        ConfigBox: Parsed YAML content with attribute-style access.

    Raises:
        LoopSoupException: If the file is empty, not found, or cannot be parsed.
    """
    path_to_yaml = resolve_path(path_to_yaml)
    try:
        if not path_to_yaml.exists():
            raise FileNotFoundError(f"No such file or directory: '{path_to_yaml}'")
        with open(path_to_yaml) as yaml_file:
            content = yaml.safe_load(yaml_file)
            if content is None:
                raise BoxValueError("YAML file is empty")
            logger.info(f"YAML file: {path_to_yaml} loaded successfully.")
            return ConfigBox(content)
    except BoxValueError as e:
        raise LoopSoupException(e, error_type="EmptyYAML", context={"path": str(path_to_yaml)},
                                exit_code=EXIT_IO, log_immediately=True)
    except FileNotFoundError as e:
        raise LoopSoupException(e, error_type="FileNotFound", context={"path": str(path_to_yaml)},
                                exit_code=EXIT_IO, log_immediately=True)
    except Exception as e:
        raise LoopSoupException(e, error_type="YAMLReadError", context={"path": str(path_to_yaml)},
                                exit_code=EXIT_IO, log_immediately=True)


@ensure_annotations
def read_json(path_to_json: Path) -> dict:
    """
    Reads a JSON object from disk (experiment config files, exact-engine request batches
    are lists and go through `read_json_any`).
    """
    content = read_json_any(path_to_json)
    if not isinstance(content, dict):
        raise LoopSoupException(ValueError("JSON config must be an object"), error_type="JSONReadError",
                                context={"path": str(path_to_json)}, exit_code=EXIT_IO)
    return content


def read_json_any(path_to_json: Path) -> Any:
    """Reads any JSON document from disk."""
    path_to_json = resolve_path(path_to_json)
    try:
        with open(path_to_json) as json_file:
            content = json.load(json_file)
        logger.info(f"JSON file: {path_to_json} loaded successfully.")
        return content
    except FileNotFoundError as e:
        raise LoopSoupException(e, error_type="FileNotFound", context={"path": str(path_to_json)},
                                exit_code=EXIT_IO, log_immediately=True)
    except Exception as e:
        raise LoopSoupException(e, error_type="JSONReadError", context={"path": str(path_to_json)},
                                exit_code=EXIT_IO, log_immediately=True)


def write_text(text: str, file_path: Path) -> Path:
    """
    Writes text to a file, creating parent directories.

    Raises:
        LoopSoupException: DirectoryCreationError when the parent cannot be made,
            ReportWriteError on any other I/O failure.
    """
    file_path = Path(file_path)
    create_directories([file_path.parent], verbose=False)
    try:
        file_path.write_text(text, encoding="utf8")
        logger.info(f"Wrote {len(text)} characters to {file_path}")
        return file_path
    except Exception as e:
        raise LoopSoupException(e, error_type="ReportWriteError", context={"path": str(file_path)},
                                exit_code=EXIT_IO, log_immediately=True)


def create_directories(path_to_directories: list, verbose: bool = True):
    """
    Creates directories specified in the list if they do not exist.

    Raises:
        LoopSoupException: If an error occurs while creating a directory.
    """
    for path in path_to_directories:
        try:
            os.makedirs(path, exist_ok=True)
            if verbose:
                logger.info(f"Created directory at: {path}")
        except Exception as e:
            raise LoopSoupException(e, error_type="DirectoryCreationError", context={"path": str(path)},
                                    exit_code=EXIT_IO, log_immediately=True)
