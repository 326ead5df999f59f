use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{AugmentError, GenerationRequest, GeneratorBackend};
use crate::seed::hash64;

/// Deterministic stand-in for the diffusion model.
///
/// Output depends only on the seed, the prompt digest and the output size:
/// seeded noise with the prompt digest XOR-ed into the top rows.
pub fn mock_generate(req: &GenerationRequest) -> Vec<u8> {
    let (width, height) = req.output_size;
    let prompt_digest = Sha256::digest(req.prompt_text.as_bytes());
    let stream = hash64(&[
        b"mock",
        &req.seed.to_le_bytes(),
        prompt_digest.as_slice(),
        &width.to_le_bytes(),
        &height.to_le_bytes(),
    ]);

    let row_len = width as usize * 3;
    let mut pixels = vec![0u8; row_len * height as usize];
    ChaCha8Rng::seed_from_u64(stream).fill_bytes(&mut pixels);
    let band = row_len * (height as usize).min(8);
    for (i, px) in pixels[..band].iter_mut().enumerate() {
        *px ^= prompt_digest[i % prompt_digest.len()];
    }

    let mut png_bytes = Vec::new();
    let mut encoder = png::Encoder::new(&mut png_bytes, width, height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().expect("in-memory PNG header");
    writer.write_image_data(&pixels).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG finish");
    png_bytes
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

impl GeneratorBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<u8>, AugmentError> {
        Ok(mock_generate(request))
    }
}
