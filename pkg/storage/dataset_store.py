"""
Dataset Store
Reads and writes datasets (CSV and KDKM binary), clustering results and sweep reports
"""

import io
import json
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import Constants, get_config
from core.errors import DatasetFormatError
from core.filtering import ClusteringResult

# magic "KDKM", version byte, n as u64 LE, m as u32 LE, then n*m float64 LE row-major
BINARY_HEADER = np.dtype([('magic', 'S4'), ('version', 'u1'), ('n', '<u8'), ('m', '<u4')])

RESULT_SCHEMA = 'kdkmeans.result/1'
CENTROIDS_MARKER = '# centroids'
ASSIGNMENTS_MARKER = '# assignments'
METRICS_PREFIX = '# metrics: '
CONFIG_PREFIX = '# config: '


def infer_dataset_format(path: str, fmt: Optional[str] = None) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in Constants.DATASET_FORMATS:
            raise DatasetFormatError(path, f"unknown dataset format '{fmt}'")
        return fmt
    return 'csv' if str(path).lower().endswith('.csv') else 'binary'


def infer_result_format(path: str, fmt: Optional[str] = None, default: str = 'json') -> str:
    """Explicit format first, then a .csv or .json suffix, then the configured default"""
    if not fmt:
        suffix = os.path.splitext(str(path))[1].lower().lstrip('.')
        fmt = suffix if suffix in Constants.OUTPUT_FORMATS else default
    fmt = fmt.lower()
    if fmt not in Constants.OUTPUT_FORMATS:
        raise DatasetFormatError(path, f"unknown output format '{fmt}'")
    return fmt


class DatasetStore:
    def __init__(self, default_output_format: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.default_output_format = default_output_format or get_config().OUTPUT_FORMAT

    # ------------------------------------------------------------------ datasets

    def load_dataset(self, path: str, fmt: Optional[str] = None) -> np.ndarray:
        """Load an (n, m) float64 point array from CSV or KDKM binary"""
        fmt = infer_dataset_format(path, fmt)
        if not os.path.exists(path):
            raise FileNotFoundError(f"Dataset not found: {path}")
        try:
            points = self._load_csv(path) if fmt == 'csv' else self._load_binary(path)
            self.logger.info(f"Loaded dataset {path}: n={points.shape[0]} m={points.shape[1]}")
            return points
        except DatasetFormatError as e:
            self.logger.error(f"Dataset load failed: {str(e)}")
            raise

    def _load_csv(self, path: str) -> np.ndarray:
        try:
            frame = pd.read_csv(path, header=None, comment='#', skip_blank_lines=True,
                                dtype=np.float64, float_precision='round_trip')
        except pd.errors.EmptyDataError:
            raise DatasetFormatError(path, "no data rows") from None
        except (ValueError, pd.errors.ParserError) as e:
            line, message = self._locate_csv_error(path)
            raise DatasetFormatError(path, message or str(e), line) from None

        points = frame.to_numpy(dtype=np.float64)
        if points.shape[0] == 0:
            raise DatasetFormatError(path, "no data rows")
        if not np.all(np.isfinite(points)):
            line, message = self._locate_csv_error(path)
            raise DatasetFormatError(path, message or "missing or non-finite value", line)
        return points

    @staticmethod
    def _locate_csv_error(path: str) -> Tuple[Optional[int], Optional[str]]:
        """Re-scan a CSV file that failed to parse and report the first offending line"""
        expected = None
        with open(path, 'r') as handle:
            for number, raw in enumerate(handle, start=1):
                line = raw.split('#', 1)[0].strip()
                if not line:
                    continue
                fields = line.split(',')
                if expected is None:
                    expected = len(fields)
                if len(fields) != expected:
                    return number, f"expected {expected} values, found {len(fields)}"
                try:
                    values = [float(f) for f in fields]
                except ValueError:
                    return number, f"malformed value in '{line}'"
                if not all(np.isfinite(values)):
                    return number, "non-finite value"
        return None, None

    def _load_binary(self, path: str) -> np.ndarray:
        with open(path, 'rb') as handle:
            header = np.fromfile(handle, dtype=BINARY_HEADER, count=1)
            if header.shape[0] != 1:
                raise DatasetFormatError(path, "truncated header")
            header = header[0]
            if header['magic'] != Constants.BINARY_MAGIC:
                raise DatasetFormatError(path, f"bad magic {bytes(header['magic'])!r}")
            if int(header['version']) != Constants.BINARY_VERSION:
                raise DatasetFormatError(path, f"unsupported version {int(header['version'])}")
            n, m = int(header['n']), int(header['m'])
            if n < 1 or m < 1:
                raise DatasetFormatError(path, f"invalid shape n={n} m={m}")
            values = np.fromfile(handle, dtype='<f8', count=n * m)
        if values.shape[0] != n * m:
            raise DatasetFormatError(path, f"expected {n * m} values, found {values.shape[0]}")
        points = values.reshape(n, m).astype(np.float64, copy=False)
        if not np.all(np.isfinite(points)):
            raise DatasetFormatError(path, "non-finite coordinate")
        return points

    def save_dataset(self, points: np.ndarray, path: str, fmt: Optional[str] = None) -> None:
        fmt = infer_dataset_format(path, fmt)
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        try:
            self._ensure_parent(path)
            if fmt == 'csv':
                pd.DataFrame(points).to_csv(path, header=False, index=False, float_format='%.17g')
            else:
                header = np.array([(Constants.BINARY_MAGIC, Constants.BINARY_VERSION,
                                    points.shape[0], points.shape[1])], dtype=BINARY_HEADER)
                with open(path, 'wb') as handle:
                    header.tofile(handle)
                    points.astype('<f8', copy=False).tofile(handle)
            self.logger.info(f"Saved dataset {path}: n={points.shape[0]} m={points.shape[1]} ({fmt})")
        except OSError as e:
            self.logger.error(f"Failed to write dataset {path}: {str(e)}")
            raise OSError(f"{path}: {e.strerror or e}") from e

    # ------------------------------------------------------------------ results

    def save_result(self, result: ClusteringResult, path: str, fmt: Optional[str] = None,
                    config_echo: Optional[Dict] = None) -> None:
        """Write centroids, assignments, metrics and the run configuration"""
        fmt = infer_result_format(path, fmt, self.default_output_format)
        centroids = result.centroids
        payload = {
            'schema': RESULT_SCHEMA,
            'k': centroids.k,
            'dimensionality': centroids.dimensionality,
            'n': int(result.assignments.shape[0]),
            'iterations': int(result.iterations),
            'iterations_level1': [int(i) for i in result.iterations_level1],
            'iterations_level2': int(result.iterations_level2),
            'centroids': centroids.positions.tolist(),
            'cluster_sizes': [int(c) for c in centroids.acc_count],
            'assignments': [int(a) for a in result.assignments],
            'metrics': result.metrics.to_dict(),
            'config': config_echo or {},
        }
        try:
            self._ensure_parent(path)
            if fmt == 'json':
                with open(path, 'w') as handle:
                    json.dump(payload, handle, indent=2)
            else:
                self._write_result_csv(payload, path)
            self.logger.info(f"Saved result {path} ({fmt})")
        except OSError as e:
            self.logger.error(f"Failed to write result {path}: {str(e)}")
            raise OSError(f"{path}: {e.strerror or e}") from e

    @staticmethod
    def _write_result_csv(payload: Dict, path: str) -> None:
        m = payload['dimensionality']
        centroid_frame = pd.DataFrame(payload['centroids'], columns=[f'x{i}' for i in range(m)])
        centroid_frame.insert(0, 'size', payload['cluster_sizes'])
        centroid_frame.insert(0, 'centroid', range(payload['k']))
        assignment_frame = pd.DataFrame({'point': range(payload['n']),
                                         'cluster': payload['assignments']})
        summary = {key: payload[key] for key in
                   ('schema', 'k', 'dimensionality', 'n', 'iterations', 'iterations_level1',
                    'iterations_level2')}
        with open(path, 'w', newline='') as handle:
            handle.write(f"{CONFIG_PREFIX}{json.dumps({**summary, 'config': payload['config']})}\n")
            handle.write(f"{METRICS_PREFIX}{json.dumps(payload['metrics'])}\n")
            handle.write(f"{CENTROIDS_MARKER}\n")
            centroid_frame.to_csv(handle, index=False, float_format='%.17g')
            handle.write(f"{ASSIGNMENTS_MARKER}\n")
            assignment_frame.to_csv(handle, index=False)

    def load_result(self, path: str, fmt: Optional[str] = None) -> Dict:
        """Read a result file back into the JSON payload layout (centroids as an array)"""
        fmt = infer_result_format(path, fmt, self.default_output_format)
        if fmt == 'json':
            with open(path, 'r') as handle:
                payload = json.load(handle)
        else:
            payload = self._read_result_csv(path)
        if payload.get('schema') != RESULT_SCHEMA:
            raise DatasetFormatError(path, f"unknown result schema {payload.get('schema')!r}")
        payload['centroids'] = np.array(payload['centroids'], dtype=np.float64)
        payload['assignments'] = np.array(payload['assignments'], dtype=np.int64)
        return payload

    @staticmethod
    def _read_result_csv(path: str) -> Dict:
        with open(path, 'r') as handle:
            text = handle.read()
        head, _, rest = text.partition(f"{CENTROIDS_MARKER}\n")
        centroid_text, _, assignment_text = rest.partition(f"{ASSIGNMENTS_MARKER}\n")
        payload, metrics = {}, {}
        for line in head.splitlines():
            if line.startswith(CONFIG_PREFIX):
                payload = json.loads(line[len(CONFIG_PREFIX):])
            elif line.startswith(METRICS_PREFIX):
                metrics = json.loads(line[len(METRICS_PREFIX):])
        if not payload or not centroid_text:
            raise DatasetFormatError(path, "not a result file")
        centroids = pd.read_csv(io.StringIO(centroid_text), float_precision='round_trip')
        assignments = pd.read_csv(io.StringIO(assignment_text))
        payload['metrics'] = metrics
        payload['cluster_sizes'] = centroids['size'].astype(int).tolist()
        payload['centroids'] = centroids.drop(columns=['centroid', 'size']).to_numpy(dtype=np.float64)
        payload['assignments'] = assignments['cluster'].to_numpy(dtype=np.int64)
        return payload

    # ------------------------------------------------------------------ sidecars and reports

    def save_json(self, data: Dict, path: str) -> None:
        self._ensure_parent(path)
        with open(path, 'w') as handle:
            json.dump(data, handle, indent=2)

    def load_json(self, path: str) -> Dict:
        with open(path, 'r') as handle:
            return json.load(handle)

    def save_report(self, rows: List[Dict], path: str, fmt: Optional[str] = None,
                    context: Optional[Dict] = None) -> None:
        """Write sweep rows as CSV, or as JSON together with report context"""
        fmt = infer_result_format(path, fmt, self.default_output_format)
        frame = pd.DataFrame(rows)
        self._ensure_parent(path)
        if fmt == 'csv':
            frame.to_csv(path, index=False)
        else:
            records = json.loads(frame.to_json(orient='records'))
            self.save_json({'rows': records, 'context': context or {}}, path)
        self.logger.info(f"Saved report {path}: {len(rows)} rows ({fmt})")

    @staticmethod
    def _ensure_parent(path: str) -> None:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
