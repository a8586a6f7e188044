import os
import hashlib
import json
from typing import Optional

from .toolbox import atomic_write_text

# Name of the per-out_dir manifest that records the digest of each data output
MANIFEST_FILE = "manifest.json"


def _compute_file_hash(path: str) -> Optional[str]:
    """
    Compute the SHA256 hash of a file's contents.

    Parameters:
      path (str): The file path to compute the hash for.

    Returns:
      str|None: The hexadecimal SHA256 hash if the file exists, or None if the file is not found.
    """
    hasher = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            while chunk := f.read(8192):
                hasher.update(chunk)
        return hasher.hexdigest()
    except FileNotFoundError:
        return None


def _manifest_path(out_dir: str) -> str:
    return os.path.join(out_dir, MANIFEST_FILE)


def _load_log(out_dir: str) -> dict:
    """
    Load the manifest of an output directory.

    Returns:
      dict: Output file name -> {"hash": sha256}, empty if there is no manifest yet.
    """
    path = _manifest_path(out_dir)
    if os.path.exists(path):
        with open(path, "r") as f:
            return json.load(f)
    return {}


def _save_log(out_dir: str, log_data: dict) -> None:
    atomic_write_text(_manifest_path(out_dir), json.dumps(log_data, indent=2, sort_keys=True) + "\n")


def remove_log(out_dir: str, name: str) -> None:
    """
    Removes an entry from the manifest of `out_dir`.

    Parameters:
      out_dir (str): Output directory holding the manifest.
      name (str): File name (relative to out_dir) to forget.
    """
    log_data = _load_log(out_dir)
    if name in log_data:
        del log_data[name]
        _save_log(out_dir, log_data)


def is_logged(out_dir: str, name: str) -> bool:
    """
    Check if an output file is in the manifest and its content is unchanged.

    Parameters:
      out_dir (str): Output directory holding the manifest.
      name (str): File name relative to out_dir.

    Returns:
      bool: True if the logged hash matches the file on disk.
    """
    log_data = _load_log(out_dir)
    if name not in log_data:
        return False
    return log_data[name]["hash"] == _compute_file_hash(os.path.join(out_dir, name))


def log_file(out_dir: str, name: str) -> Optional[str]:
    """
    Record the current SHA256 of `out_dir/name` in the manifest.

    Parameters:
      out_dir (str): Output directory holding the manifest.
      name (str): File name relative to out_dir.

    Returns:
      str|None: The digest that was logged, None if the file does not exist.
    """
    file_hash = _compute_file_hash(os.path.join(out_dir, name))
    if file_hash is not None:
        log_data = _load_log(out_dir)
        log_data[name] = {"hash": file_hash}
        _save_log(out_dir, log_data)
    return file_hash
