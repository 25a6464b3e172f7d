import re
import csv
import hashlib
import logging
from pathlib import Path
from threading import Lock
from dataclasses import dataclass, field, asdict

import numpy as np
import ujson

import config_engine
from fock_core import FockBasis, WaveFunction
from projection_engine import OrbitalSet, ConfigAmplitudes
from errors import FileFormatError

# ロガーの設定
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

# --- 定数 ---
MANIFEST_FILE = "manifest.json"
_WAVEFUNCTION_HEADER = re.compile(r"^#\s*d=(\d+)\s+n=(\d+)\s+count=(\d+)\s*$")
_ORBITAL_HEADER = re.compile(r"^#\s*d=(\d+)\s+M=(\d+)\s*$")


def format_real(value: float) -> str:
    """17桁で書き出す (float() で読み戻すとビット単位で一致する)"""
    return "%.17g" % float(value)


def spec_hash(config: dict) -> str:
    """パース済み設定の正規化 JSON の SHA-256"""
    canonical = ujson.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# --- 波動関数ダンプ ---


def wavefunction_lines(f: WaveFunction) -> list[str]:
    lines = [f"# d={f.d} n={f.n_particles} count={f.basis.dimension}"]
    for index, (tup, amp) in enumerate(zip(f.basis.states, f.amplitudes)):
        xs = ",".join(str(int(x)) for x in tup)
        lines.append(f"{index} {xs} {format_real(amp.real)} {format_real(amp.imag)}")
    return lines


def dump_wavefunction(f: WaveFunction, path) -> Path:
    path = Path(path)
    path.write_text("\n".join(wavefunction_lines(f)) + "\n", encoding="utf-8")
    return path


def load_wavefunction(path) -> WaveFunction:
    """ダンプを読み込む。ヘッダ・件数・タプルの順序が合わなければ FileFormatError"""
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"波動関数ファイルが見つかりません: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise FileFormatError(f"波動関数ファイルが空です: {path}")
    header = _WAVEFUNCTION_HEADER.match(lines[0].strip())
    if header is None:
        raise FileFormatError(f"ヘッダ行が不正です: {lines[0]!r}")
    d, n, count = (int(v) for v in header.groups())
    try:
        basis = FockBasis(d, n)
    except ValueError as e:
        raise FileFormatError(f"ヘッダの d, n が不正です: {e}")
    if count != basis.dimension or len(lines) - 1 != count:
        raise FileFormatError(
            f"状態数が一致しません: ヘッダ {count}, 行数 {len(lines) - 1}, C(d,n)={basis.dimension}"
        )
    amps = np.zeros(count, dtype=np.complex128)
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 4:
            raise FileFormatError(f"行の形式が不正です: {line!r}")
        try:
            index = int(parts[0])
            tup = tuple(int(x) for x in parts[1].split(","))
            amp = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise FileFormatError(f"数値を読み取れません: {line!r}")
        if not 0 <= index < count or basis.unrank(index) != tup:
            raise FileFormatError(f"インデックス {index} とタプル {tup} が一致しません。")
        amps[index] = amp
    return WaveFunction(basis, amps)


# --- 軌道ファイル ---


def orbital_lines(V: OrbitalSet) -> list[str]:
    lines = [f"# d={V.dim} M={V.n_orbitals}"]
    for row in V.matrix:
        cells = []
        for value in row:
            cells.append(format_real(value.real))
            cells.append(format_real(value.imag))
        lines.append(" ".join(cells))
    return lines


def dump_orbitals(V: OrbitalSet, path) -> Path:
    path = Path(path)
    path.write_text("\n".join(orbital_lines(V)) + "\n", encoding="utf-8")
    return path


def load_orbitals(path) -> OrbitalSet:
    path = Path(path)
    if not path.exists():
        raise FileFormatError(f"軌道ファイルが見つかりません: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    header = _ORBITAL_HEADER.match(lines[0].strip()) if lines else None
    if header is None:
        raise FileFormatError(f"軌道ファイルのヘッダが不正です: {path}")
    d, m = (int(v) for v in header.groups())
    if len(lines) - 1 != d:
        raise FileFormatError(f"行数 {len(lines) - 1} が d={d} と一致しません。")
    try:
        values = np.array([[float(x) for x in line.split()] for line in lines[1:]])
    except ValueError:
        raise FileFormatError(f"軌道ファイルに数値でない値があります: {path}")
    if values.shape != (d, 2 * m):
        raise FileFormatError(f"軌道ファイルの形 {values.shape} が ({d}, {2 * m}) と一致しません。")
    return OrbitalSet(values[:, 0::2] + 1j * values[:, 1::2])


# --- CSV ---


def config_amplitude_rows(amps: ConfigAmplitudes) -> tuple[list[str], list[list[str]]]:
    """j1..jN は 1 始まりの軌道番号"""
    n = amps.tuples.shape[1]
    header = [f"j{k + 1}" for k in range(n)] + ["re", "im"]
    rows = [
        [str(int(j) + 1) for j in tup] + [format_real(v.real), format_real(v.imag)]
        for tup, v in zip(amps.tuples, amps.values)
    ]
    return header, rows


def trace_rows(traces) -> tuple[list[str], list[list[str]]]:
    """step 0 は初期軌道での I、以降は1軌道更新ごと"""
    rows = []
    for trace in traces:
        rows.append([str(trace.restart_id), "0", format_real(trace.initial_objective)])
        for step, value in enumerate(trace.values, start=1):
            rows.append([str(trace.restart_id), str(step), format_real(value)])
    return ["restart", "step", "I"], rows


def rdm_rows(matrix: np.ndarray) -> tuple[list[str], list[list[str]]]:
    d = matrix.shape[0]
    header = [name for k in range(d) for name in (f"re_{k}", f"im_{k}")]
    rows = [
        [cell for value in row for cell in (format_real(value.real), format_real(value.imag))]
        for row in matrix
    ]
    return header, rows


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_real(value)
    return str(value)


def read_table(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@dataclass
class RunManifest:
    command: str
    spec_hash: str
    seeds: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    wall_times: dict = field(default_factory=dict)
    version: str = config_engine.VERSION

    def to_dict(self) -> dict:
        return asdict(self)


class ArtifactStore:
    """
    1回の実行の出力ディレクトリ。書き込みは全て1つのロックで直列化し、
    書いたファイルを RunManifest に記録する。
    """

    def __init__(self, output_dir, command: str, config_hash: str = "", seeds=None):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, config_hash, list(seeds or []))
        self._lock = Lock()  # スレッドセーフのためのロック

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _write(self, name: str, text: str) -> Path:
        path = self.path(name)
        with self._lock:
            try:
                path.write_text(text, encoding="utf-8")
            except OSError as e:
                logger.error(f"エラー: {path} の書き込みに失敗しました。 {e}")
                raise
            if name not in self.manifest.outputs:
                self.manifest.outputs.append(name)
        logger.info(f"{path} を書き込みました。")
        return path

    def write_table(self, name: str, header: list[str], rows) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(format_cell(cell) for cell in row))
        return self._write(name, "\n".join(lines) + "\n")

    def write_lines(self, name: str, lines: list[str]) -> Path:
        return self._write(name, "\n".join(lines) + "\n")

    def save_wavefunction(self, name: str, f: WaveFunction) -> Path:
        return self.write_lines(name, wavefunction_lines(f))

    def save_orbitals(self, name: str, V: OrbitalSet) -> Path:
        return self.write_lines(name, orbital_lines(V))

    def save_config_amplitudes(self, name: str, amps: ConfigAmplitudes) -> Path:
        return self.write_table(name, *config_amplitude_rows(amps))

    def save_traces(self, name: str, traces) -> Path:
        return self.write_table(name, *trace_rows(traces))

    def save_rdm(self, name: str, matrix: np.ndarray) -> Path:
        return self.write_table(name, *rdm_rows(np.asarray(matrix)))

    def save_record(self, name: str, record: dict) -> Path:
        return self._write(name, ujson.dumps(record, indent=2, ensure_ascii=False) + "\n")

    def record_wall_time(self, label: str, seconds: float):
        with self._lock:
            self.manifest.wall_times[label] = round(float(seconds), 6)

    def save_manifest(self) -> Path:
        path = self.path(MANIFEST_FILE)
        with self._lock:
            try:
                path.write_text(
                    ujson.dumps(self.manifest.to_dict(), indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8",
                )
            except OSError as e:
                logger.error(f"エラー: マニフェストの保存に失敗しました。 {e}")
                raise
        logger.info(f"マニフェストを {path} に保存しました ({len(self.manifest.outputs)} ファイル)。")
        return path
