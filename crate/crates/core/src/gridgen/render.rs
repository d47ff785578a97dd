use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::codecs::png::PngEncoder;
use image::imageops::{self, FilterType};
use image::{ExtendedColorType, ImageEncoder, RgbImage, RgbaImage};
use parking_lot::Mutex;

use super::GridLayout;
use crate::instance::GenerationError;
use crate::taxonomy::ObjectCatalog;

pub const DEFAULT_CELL_SIZE: u32 = 256;

/// Light solid backgrounds indexed by a layout's background id.
pub const BACKGROUNDS: [[u8; 3]; 8] = [
    [255, 255, 255],
    [245, 245, 240],
    [235, 242, 250],
    [240, 250, 235],
    [252, 240, 235],
    [248, 244, 226],
    [238, 236, 250],
    [230, 246, 246],
];

/// Decoded sprites and their resized variants, shared across instances.
#[derive(Default)]
pub struct SpriteCache {
    decoded: Mutex<HashMap<PathBuf, Arc<RgbaImage>>>,
    resized: Mutex<HashMap<(PathBuf, u32, u32), Arc<RgbaImage>>>,
}

impl std::fmt::Debug for SpriteCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpriteCache")
            .field("decoded", &self.decoded.lock().len())
            .finish()
    }
}

impl SpriteCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(&self, path: &Path) -> Result<Arc<RgbaImage>, GenerationError> {
        if let Some(img) = self.decoded.lock().get(path) {
            return Ok(img.clone());
        }
        let img = image::open(path)
            .map_err(|e| GenerationError::Render(format!("sprite {}: {e}", path.display())))?
            .to_rgba8();
        if img.width() == 0 || img.height() == 0 {
            return Err(GenerationError::Render(format!("sprite {} is empty", path.display())));
        }
        let img = Arc::new(img);
        self.decoded.lock().insert(path.to_path_buf(), img.clone());
        Ok(img)
    }

    fn load_resized(&self, path: &Path, w: u32, h: u32) -> Result<Arc<RgbaImage>, GenerationError> {
        let key = (path.to_path_buf(), w, h);
        if let Some(img) = self.resized.lock().get(&key) {
            return Ok(img.clone());
        }
        let src = self.load(path)?;
        let img = if src.width() == w && src.height() == h {
            src
        } else {
            Arc::new(imageops::resize(src.as_ref(), w, h, FilterType::Triangle))
        };
        self.resized.lock().insert(key, img.clone());
        Ok(img)
    }
}

/// Composes `layout` into an RGB PNG of `n*cell_size` pixels per side.
pub fn compose_image(
    layout: &GridLayout,
    catalog: &ObjectCatalog,
    sprites: &SpriteCache,
    cell_size: u32,
) -> Result<Vec<u8>, GenerationError> {
    let canvas = compose_pixels(layout, catalog, sprites, cell_size)?;
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(canvas.as_raw(), canvas.width(), canvas.height(), ExtendedColorType::Rgb8)
        .map_err(|e| GenerationError::Render(e.to_string()))?;
    Ok(out)
}

pub fn compose_pixels(
    layout: &GridLayout,
    catalog: &ObjectCatalog,
    sprites: &SpriteCache,
    cell_size: u32,
) -> Result<RgbImage, GenerationError> {
    let n = layout.n as u32;
    let s = cell_size;
    let bg = BACKGROUNDS[layout.background as usize % BACKGROUNDS.len()];
    let mut canvas = RgbImage::from_pixel(n * s, n * s, image::Rgb(bg));
    for (cell, placed) in layout.occupied() {
        let obj = catalog
            .get(&placed.object_id)
            .ok_or_else(|| GenerationError::Render(format!("object `{}` not in catalog", placed.object_id)))?;
        let path = catalog.sprite_path(obj);
        let src = sprites.load(&path)?;
        let target = (placed.scale * s as f64).round().max(1.0);
        let factor = target / src.width().max(src.height()) as f64;
        let w = ((src.width() as f64 * factor).round() as u32).clamp(1, s);
        let h = ((src.height() as f64 * factor).round() as u32).clamp(1, s);
        let sprite = sprites.load_resized(&path, w, h)?;

        let cx0 = (cell as u32 % n * s) as i64;
        let cy0 = (cell as u32 / n * s) as i64;
        let x0 = cx0 + (s - w) as i64 / 2 + placed.offset.0 as i64;
        let y0 = cy0 + (s - h) as i64 / 2 + placed.offset.1 as i64;
        for (sx, sy, px) in sprite.enumerate_pixels() {
            let x = x0 + sx as i64;
            let y = y0 + sy as i64;
            // clip to the owning cell
            if x < cx0 || y < cy0 || x >= cx0 + s as i64 || y >= cy0 + s as i64 {
                continue;
            }
            let a = px[3] as u32;
            if a == 0 {
                continue;
            }
            let dst = canvas.get_pixel_mut(x as u32, y as u32);
            for c in 0..3 {
                dst[c] = ((px[c] as u32 * a + dst[c] as u32 * (255 - a) + 127) / 255) as u8;
            }
        }
    }
    Ok(canvas)
}
