//! Signal representations and the waveform-to-logmel chain.

pub mod cache;
pub mod fourier;
pub mod labels;
pub mod mel;
pub mod metadata;
pub mod preprocess;
pub mod resample;
pub mod stdft;
pub mod wav;
pub mod waveform;

pub use cache::{read_clip_cache, write_clip_cache, CachedClip};
pub use fourier::{dft, expand_half_spectrum, idft, idft_real};
pub use mel::{hz_to_mel, logmel, mel_spectrogram, mel_to_hz, MelFilterbank, MelScale, MelSpectrogram};
pub use metadata::{read_metadata, ClipMeta};
pub use preprocess::{preprocess_dataset, preprocess_file, LabeledClip, PreprocessReport};
pub use resample::{mixdown_mono, resample_linear};
pub use stdft::{hann_window, stdft, Spectrogram, StdftConfig};
pub use wav::{read_wav, write_wav_float32, write_wav_pcm16, WavData};
pub use waveform::Waveform;
