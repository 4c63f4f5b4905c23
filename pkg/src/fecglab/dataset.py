"""In-silico dataset generation, persistence, and train/test splitting.

Records are stored as `.fbin` files: a JSON header followed by little-endian
float32 channel blocks, each protected by CRC-32. The abdominal channel is
derived (maternal + fetal + noise) and recomputed on load, so the
superposition identity holds exactly after a round trip.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import noisegen
from .ecgsynth import default_model, make_rr, scale_fetal, synth_ecg
from .errors import (
    ChecksumError,
    ConfigError,
    FileFormatError,
    RejectedInput,
    TruncatedFileError,
    VersionError,
)
from .timeseries import DEFAULT_FS, TimeSeries

FBIN_MAGIC = b"FBIN"
FBIN_VERSION = 1
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
RECORDS_DIR = "records"

FULL_SCALE_RECORDS = 10_100
DESK_SCALE_RECORDS = 120


@dataclass(frozen=True)
class RecordConfig:
    fs: float = DEFAULT_FS
    duration_s: float = 60.0
    snr_range_db: tuple[float, float] = (5.0, 20.0)
    maternal_peak_uv: tuple[float, float] = (50.0, 250.0)
    fetal_peak_uv: tuple[float, float] = (5.0, 20.0)
    maternal_hr_bpm: tuple[float, float] = (65.0, 95.0)
    fetal_hr_bpm: tuple[float, float] = (120.0, 160.0)
    maternal_hrv_std_bpm: float = 2.0
    fetal_hrv_std_bpm: float = 3.0

    def __post_init__(self):
        for name in ("snr_range_db", "maternal_peak_uv", "fetal_peak_uv",
                     "maternal_hr_bpm", "fetal_hr_bpm"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ConfigError(f"{name}: expected lo <= hi, got ({lo}, {hi})")
        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")


@dataclass(frozen=True)
class Record:
    abdominal: TimeSeries
    fecg_ref: TimeSeries
    mecg_ref: TimeSeries
    noise_ref: TimeSeries
    meta: dict

    def __post_init__(self):
        chans = (self.abdominal, self.fecg_ref, self.mecg_ref, self.noise_ref)
        if len({len(c.samples) for c in chans}) != 1 or len({c.fs for c in chans}) != 1:
            raise RejectedInput("record channels must share length and fs")
        total = self.mecg_ref.samples + self.fecg_ref.samples + self.noise_ref.samples
        if np.abs(self.abdominal.samples - total).max() > 1e-6:
            raise RejectedInput("abdominal must equal mECG + fECG + noise within 1e-6")


def _f32(a: np.ndarray) -> np.ndarray:
    """Quantize to float32-representable values (stored as float64)."""
    return a.astype(np.float32).astype(np.float64)


def _synth_channel(model_scale, mean_hr, hrv_std, n_samples, fs, rng):
    n_beats = int(np.ceil(n_samples / fs * mean_hr / 60.0)) + 4
    rr = make_rr(mean_hr, hrv_std, n_beats, rng)
    ecg, rpeaks = synth_ecg(default_model().scaled(model_scale), rr, fs)
    if len(ecg.samples) < n_samples:
        raise RejectedInput("synthesized signal shorter than requested duration")
    samples = ecg.samples[:n_samples]
    return TimeSeries(samples, fs), rpeaks[rpeaks < n_samples]


def generate_record(seed: int, config: RecordConfig = RecordConfig()) -> Record:
    rng = np.random.default_rng(seed)
    fs = config.fs
    n = int(round(config.duration_s * fs))

    maternal_peak = rng.uniform(*config.maternal_peak_uv)
    maternal_hr = rng.uniform(*config.maternal_hr_bpm)
    fetal_hr = rng.uniform(*config.fetal_hr_bpm)

    mecg, m_peaks = _synth_channel(maternal_peak, maternal_hr,
                                   config.maternal_hrv_std_bpm, n, fs, rng)
    fecg_raw, f_peaks = _synth_channel(1.0, fetal_hr,
                                       config.fetal_hrv_std_bpm, n, fs, rng)
    fecg, fetal_peak = scale_fetal(fecg_raw, rng, band_uv=config.fetal_peak_uv)

    bands = noisegen.sample_bands(rng)
    noise_raw = noisegen.synthesize_noise(
        n, fs, bands, noisegen.NoiseWeights(), noisegen.MixtureParams(), rng
    )
    snr_db = rng.uniform(*config.snr_range_db)
    physio = TimeSeries(mecg.samples + fecg.samples, fs)
    noise = noisegen.scale_to_snr(noise_raw, physio, snr_db)

    # Quantize channels so a float32 round trip is bit-exact; the abdominal
    # channel is the exact float64 sum of the quantized components.
    mecg = mecg.with_samples(_f32(mecg.samples))
    fecg = fecg.with_samples(_f32(fecg.samples))
    noise = noise.with_samples(_f32(noise.samples))
    abdominal = TimeSeries(mecg.samples + fecg.samples + noise.samples, fs)

    meta = {
        "seed": int(seed),
        "snr_db": float(snr_db),
        "bands": {"pink_hi": bands.pink_hi, "white_hi": bands.white_hi},
        "fetal_peak_uv": float(fetal_peak),
        "maternal_mean_hr_bpm": float(maternal_hr),
        "fetal_mean_hr_bpm": float(fetal_hr),
        "maternal_rpeaks": [int(p) for p in m_peaks],
        "fetal_rpeaks": [int(p) for p in f_peaks],
    }
    return Record(abdominal, fecg, mecg, noise, meta)


# -- persistence ---------------------------------------------------------------

_CHANNELS = ("mecg_ref", "fecg_ref", "noise_ref")


def save_record(record: Record, path) -> None:
    blocks = []
    chan_meta = []
    for name in _CHANNELS:
        data = getattr(record, name).samples.astype("<f4").tobytes()
        blocks.append(data)
        chan_meta.append({"name": name, "n_bytes": len(data),
                          "crc32": zlib.crc32(data)})
    header = {
        "version": FBIN_VERSION,
        "fs": record.abdominal.fs,
        "n_samples": len(record.abdominal.samples),
        "channels": chan_meta,
        "meta": record.meta,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(FBIN_MAGIC)
        fh.write(struct.pack("<II", FBIN_VERSION, len(hbytes)))
        fh.write(hbytes)
        for b in blocks:
            fh.write(b)


def load_record(path) -> Record:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != FBIN_MAGIC:
        raise FileFormatError(f"{path}: not a record file")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != FBIN_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FBIN_VERSION}")
    if len(raw) < 12 + hlen:
        raise TruncatedFileError(f"{path}: truncated header")
    header = json.loads(raw[12 : 12 + hlen])
    fs = header["fs"]
    offset = 12 + hlen
    channels = {}
    for ch in header["channels"]:
        end = offset + ch["n_bytes"]
        if len(raw) < end:
            raise TruncatedFileError(f"{path}: truncated channel {ch['name']}")
        block = raw[offset:end]
        if zlib.crc32(block) != ch["crc32"]:
            raise ChecksumError(f"{path}: checksum mismatch in channel {ch['name']}")
        channels[ch["name"]] = np.frombuffer(block, "<f4").astype(np.float64)
        offset = end
    if len(raw) != offset:
        raise ChecksumError(f"{path}: {len(raw) - offset} unexpected trailing bytes")
    mecg = TimeSeries(channels["mecg_ref"], fs)
    fecg = TimeSeries(channels["fecg_ref"], fs)
    noise = TimeSeries(channels["noise_ref"], fs)
    abdominal = TimeSeries(mecg.samples + fecg.samples + noise.samples, fs)
    return Record(abdominal, fecg, mecg, noise, header["meta"])


# -- dataset-level operations ----------------------------------------------------


@dataclass(frozen=True)
class DatasetManifest:
    version: int
    fs: float
    n_records: int
    records: tuple[dict, ...]  # {"id", "file", "seed", "snr_db"}
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]

    def __post_init__(self):
        if set(self.train_ids) & set(self.test_ids):
            raise ConfigError("train and test splits overlap")


def holdout_size(n_records: int) -> int:
    """Last records are held out: 100 at full scale, ~1/6 at desk scale."""
    return min(100, max(1, round(n_records / 6)))


def plan_manifest(n_records: int, seed: int, fs: float = DEFAULT_FS) -> DatasetManifest:
    if n_records < 2:
        raise ConfigError("n_records must be >= 2")
    seeds = np.random.SeedSequence(seed).generate_state(n_records, dtype=np.uint64)
    records = tuple(
        {"id": i, "file": f"{RECORDS_DIR}/{i:05d}.fbin", "seed": int(seeds[i])}
        for i in range(n_records)
    )
    n_test = holdout_size(n_records)
    ids = tuple(range(n_records))
    return DatasetManifest(
        version=MANIFEST_VERSION,
        fs=fs,
        n_records=n_records,
        records=records,
        train_ids=ids[: n_records - n_test],
        test_ids=ids[n_records - n_test :],
    )


def generate_dataset(n_records: int, seed: int, out_dir,
                     config: RecordConfig = RecordConfig()) -> DatasetManifest:
    out = Path(out_dir)
    (out / RECORDS_DIR).mkdir(parents=True, exist_ok=True)
    manifest = plan_manifest(n_records, seed, fs=config.fs)
    records = []
    for entry in manifest.records:
        try:
            rec = generate_record(entry["seed"], config)
            save_record(rec, out / entry["file"])
        except Exception as exc:
            raise type(exc)(f"record {entry['id']}: {exc}") from exc
        records.append({**entry, "snr_db": rec.meta["snr_db"]})
    manifest = DatasetManifest(
        version=manifest.version,
        fs=manifest.fs,
        n_records=manifest.n_records,
        records=tuple(records),
        train_ids=manifest.train_ids,
        test_ids=manifest.test_ids,
    )
    save_manifest(manifest, out / MANIFEST_NAME)
    return manifest


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = asdict(manifest)
    doc["records"] = list(doc["records"])
    doc["train_ids"] = list(doc["train_ids"])
    doc["test_ids"] = list(doc["test_ids"])
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_manifest(path) -> DatasetManifest:
    doc = json.loads(Path(path).read_text())
    if doc["version"] != MANIFEST_VERSION:
        raise VersionError(f"{path}: manifest version {doc['version']}")
    return DatasetManifest(
        version=doc["version"],
        fs=doc["fs"],
        n_records=doc["n_records"],
        records=tuple(doc["records"]),
        train_ids=tuple(doc["train_ids"]),
        test_ids=tuple(doc["test_ids"]),
    )


def load_dataset_record(dataset_dir, manifest: DatasetManifest, record_id: int) -> Record:
    entry = manifest.records[record_id]
    if entry["id"] != record_id:
        entry = next(e for e in manifest.records if e["id"] == record_id)
    return load_record(Path(dataset_dir) / entry["file"])
