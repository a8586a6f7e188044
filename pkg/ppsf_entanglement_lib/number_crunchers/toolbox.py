import os
import hashlib
import tempfile
import datetime
import multiprocessing
from typing import Any, Callable, List, Union

import numpy as np
from tqdm import tqdm

# Vacuum speed of light (m/s). Wavelengths are vacuum nm everywhere.
SPEED_OF_LIGHT: float = 299792458.0

# 2*pi*c expressed in nm/s, so omega = TWO_PI_C_NM / wavelength_nm.
TWO_PI_C_NM: float = 2.0 * np.pi * SPEED_OF_LIGHT * 1e9


def tprint(*args: Any, **kwargs: Any) -> None:
    """
    Prints the provided arguments to standard output with a prefixed timestamp.

    This function wraps the built-in print function to prepend each output with a
    UTC timestamp formatted as "[MM-DD-YYYY HH:MM:SS UTC]". It accepts all positional
    and keyword arguments supported by print.

    Parameters:
        *args: Variable length argument list to be printed.
        **kwargs: Arbitrary keyword arguments for the built-in print function.

    Returns:
        None

    Example:
        >>> tprint("Computing joint spectral amplitude.")
        [10-19-2026 12:34:56 UTC] Computing joint spectral amplitude.
    """
    timestamp = datetime.datetime.now(tz=datetime.timezone.utc).strftime("[%m-%d-%Y %H:%M:%S UTC]")
    print(timestamp, *args, **kwargs)


def hash_string_list(string_list: List[str]) -> str:
    """
    Generates a unique hash for a list of strings.

    The strings are joined with a null character so that boundaries between them
    are preserved, then hashed with SHA-256.

    Parameters:
      string_list (List[str]): A list of strings to be hashed.

    Returns:
      str: Hexadecimal SHA-256 digest.

    Example:
      >>> len(hash_string_list(["paper-default/1", "{}"]))
      64
    """
    joined = "\0".join(string_list)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def cpu_pct_to_cores(pct: float) -> int:
    """
    Converts a CPU usage fraction into an equivalent number of CPU cores.

    Parameters:
      pct (float): Fraction of the available cores, between 0.0 and 1.0.

    Returns:
      int: Number of cores, at least 1.

    Example:
      >>> os.cpu_count()  # Suppose this returns 8
      8
      >>> cpu_pct_to_cores(0.25)
      2
    """
    if pct < 0.0 or pct > 1.0:
        raise ValueError("Percentage must be a value between 0.0 and 1.0 for determining core count")
    return int(max(pct * (os.cpu_count() or 1), 1))


def db_to_transmission(loss_db: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Power transmission of a loss given in dB.

    Example:
      >>> db_to_transmission(3.0)
      0.501187...
    """
    return 10.0 ** (-np.asarray(loss_db, dtype=float) / 10.0)


def wavelength_to_omega(wavelength_nm):
    """Angular frequency (rad/s) of a vacuum wavelength in nm."""
    return TWO_PI_C_NM / np.asarray(wavelength_nm, dtype=float)


def omega_to_wavelength(omega):
    """Vacuum wavelength (nm) of an angular frequency in rad/s."""
    return TWO_PI_C_NM / np.asarray(omega, dtype=float)


def atomic_write_bytes(path: str, data: bytes) -> str:
    """
    Writes bytes to `path` through a temporary file in the same directory
    followed by os.replace, so readers never observe a partial file.

    Parameters:
      path (str): Destination path. Its directory must exist.
      data (bytes): Payload.

    Returns:
      str: The destination path.

    Raises:
      OSError: With the destination path in the message.
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_path, path)
        except BaseException:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise
    except OSError as e:
        raise OSError(e.errno, f"could not write {path}: {e.strerror or e}") from e
    return path


def atomic_write_text(path: str, text: str) -> str:
    """Text flavour of atomic_write_bytes (UTF-8, newline untouched)."""
    return atomic_write_bytes(path, text.encode("utf-8"))


global_shutdown_event = None


def init_worker(shutdown_ev):
    global global_shutdown_event
    global_shutdown_event = shutdown_ev


def shutdown_requested() -> bool:
    """True once Ctrl-C was seen by the parent of this worker pool."""
    return global_shutdown_event is not None and global_shutdown_event.is_set()


def run_tasks(func: Callable[[Any], Any], args_list: List[Any], num_cores: int, desc: str) -> List[Any]:
    """
    Maps `func` over `args_list` with a tqdm progress bar.

    With more than one core the work fans out over a multiprocessing.Pool whose
    workers share a shutdown event; otherwise it runs serially. Results keep
    the order of `args_list`, so the outcome does not depend on the core count.

    Parameters:
      func (Callable): Top-level (picklable) function of one argument.
      args_list (List[Any]): One argument per task.
      num_cores (int): Worker processes to use.
      desc (str): Progress bar label.

    Returns:
      List[Any]: func(args) for every entry, in order.
    """
    shutdown_event = multiprocessing.Event()
    results = []
    try:
        if num_cores > 1 and len(args_list) > 1:
            with multiprocessing.Pool(processes=min(num_cores, len(args_list)), initializer=init_worker,
                                      initargs=(shutdown_event,)) as pool:
                for result in tqdm(pool.imap(func, args_list), desc=desc, total=len(args_list)):
                    results.append(result)
        else:
            for args in tqdm(args_list, desc=desc, total=len(args_list)):
                results.append(func(args))
    except KeyboardInterrupt:
        shutdown_event.set()
        raise
    return results
