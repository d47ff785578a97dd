//! Small, fully specified source data for tests, demos and the acceptance
//! suite: a 10-object catalog with solid-colour sprites, a taxonomy with a
//! few is-a edges, and a 5-graph scene-graph corpus (3 images, 2 videos).

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use image::{Rgba, RgbaImage};

use crate::planspace::SourceData;
use crate::sggen::SceneGraphCorpus;
use crate::taxonomy::{load_catalog, ObjectCatalog, Taxonomy};

pub const TAXONOMY: &str = "\
# catalog categories
C apple
C fruit
C cup
C table
C lamp
C book
C vase
C clock
# grouping concepts
C container
C dishware
C furniture
# scene-graph categories
C paper
C floor
C plate
C chair
C person
C snowboard
C skis
C pole
C blanket
C phone
C closet
C mirror
C door
C sandwich
C broom
E apple fruit
E cup container
E vase container
E cup dishware
E plate dishware
E table furniture
E chair furniture
";

/// `(id, category, color(s), material, shape, sprite rgb)`.
const OBJECTS: [(&str, &str, &[&str], &str, &str, [u8; 3]); 10] = [
    ("apple-1", "apple", &["red"], "organic", "round", [200, 30, 30]),
    ("banana-1", "fruit", &["yellow"], "organic", "long", [230, 210, 40]),
    ("cup-1", "cup", &["red"], "ceramic", "round", [180, 40, 60]),
    ("cup-2", "cup", &["blue"], "plastic", "tall", [40, 60, 200]),
    ("table-1", "table", &["brown"], "wood", "flat", [120, 80, 40]),
    ("table-2", "table", &["white"], "metal", "square", [210, 210, 215]),
    ("lamp-1", "lamp", &["white"], "metal", "tall", [190, 190, 170]),
    ("book-1", "book", &["blue"], "paper", "flat", [30, 50, 150]),
    ("vase-1", "vase", &["green"], "glass", "tall", [40, 160, 80]),
    ("clock-1", "clock", &["black", "white"], "metal", "round", [20, 20, 20]),
];

pub const CORPUS: &str = r#"{"graph_id":"desk","asset":"images/desk.jpg","objects":[{"id":"p","category":"paper","attributes":[{"type":"shape","value":"flat"},{"type":"color","value":"white"}]},{"id":"t","category":"table","attributes":[{"type":"color","value":"brown"},{"type":"material","value":"wood"}]},{"id":"q","category":"paper","attributes":[{"type":"shape","value":"flat"},{"type":"color","value":"white"}]},{"id":"f","category":"floor","attributes":[]},{"id":"b","category":"book","attributes":[{"type":"color","value":"blue"},{"type":"shape","value":"square"}]},{"id":"l","category":"lamp","attributes":[{"type":"color","value":"black"},{"type":"material","value":"metal"}]}],"relations":[{"source":"p","predicate":"on","target":"t"},{"source":"q","predicate":"on","target":"f"},{"source":"t","predicate":"on","target":"f"},{"source":"b","predicate":"on","target":"t"},{"source":"l","predicate":"near","target":"t"},{"source":"l","predicate":"to the left of","target":"b"}]}
{"graph_id":"kitchen","asset":"images/kitchen.jpg","objects":[{"id":"c1","category":"cup","attributes":[{"type":"color","value":"red"},{"type":"material","value":"ceramic"}]},{"id":"c2","category":"cup","attributes":[{"type":"color","value":"blue"},{"type":"material","value":"plastic"}]},{"id":"pl","category":"plate","attributes":[{"type":"color","value":"white"},{"type":"shape","value":"round"}]},{"id":"tb","category":"table","attributes":[{"type":"color","value":"white"},{"type":"color","value":"gray"},{"type":"material","value":"wood"}]},{"id":"ch","category":"chair","attributes":[{"type":"color","value":"brown"},{"type":"material","value":"wood"}]}],"relations":[{"source":"c1","predicate":"on","target":"tb"},{"source":"c2","predicate":"on","target":"tb"},{"source":"pl","predicate":"on","target":"tb"},{"source":"c1","predicate":"to the left of","target":"c2"},{"source":"c2","predicate":"to the right of","target":"c1"},{"source":"pl","predicate":"near","target":"c2"},{"source":"ch","predicate":"near","target":"tb"},{"source":"ch","predicate":"under","target":"tb"}]}
{"graph_id":"slope","asset":"images/slope.jpg","objects":[{"id":"m","category":"person","attributes":[{"type":"pose","value":"standing"}]},{"id":"s","category":"snowboard","attributes":[{"type":"color","value":"colorful"},{"type":"shape","value":"long"}]},{"id":"x","category":"pole","attributes":[{"type":"color","value":"blue"},{"type":"shape","value":"long"}]},{"id":"k","category":"skis","attributes":[{"type":"pattern","value":"patterned"}]}],"relations":[{"source":"s","predicate":"to the right of","target":"m"},{"source":"x","predicate":"to the left of","target":"k"},{"source":"m","predicate":"holding","target":"x"},{"source":"m","predicate":"behind","target":"k"}]}
{"graph_id":"bedroom","asset":"videos/bedroom.mp4","num_frames":50,"objects":[{"id":"me","category":"person"},{"id":"bl","category":"blanket"},{"id":"ph","category":"phone"},{"id":"cl","category":"closet"},{"id":"mi","category":"mirror"},{"id":"fl","category":"floor"}],"relations":[{"source":"me","predicate":"touching","target":"bl","family":"contact","frames":[0,14]},{"source":"me","predicate":"holding","target":"ph","family":"contact","frames":[12,22]},{"source":"me","predicate":"in front of","target":"mi","family":"spatial","frames":[0,9]},{"source":"me","predicate":"behind","target":"cl","family":"spatial","frames":[0,49]},{"source":"me","predicate":"on","target":"fl","family":"spatial"}],"actions":[{"label":"watching something in a mirror","start":0,"end":9},{"label":"putting a phone somewhere","start":15,"end":22},{"label":"laughing at something","start":25,"end":35},{"label":"sitting at a table","start":22,"end":49}]}
{"graph_id":"hallway","asset":"videos/hallway.mp4","num_frames":40,"objects":[{"id":"me","category":"person"},{"id":"dr","category":"door"},{"id":"cu","category":"cup"},{"id":"sw","category":"sandwich"},{"id":"ch","category":"chair"},{"id":"br","category":"broom"}],"relations":[{"source":"me","predicate":"touching","target":"dr","family":"contact","frames":[0,6]},{"source":"me","predicate":"holding","target":"cu","family":"contact","frames":[8,16]},{"source":"me","predicate":"looking at","target":"cu","family":"contact","frames":[8,12]},{"source":"me","predicate":"holding","target":"sw","family":"contact","frames":[17,31]},{"source":"me","predicate":"sitting on","target":"ch","family":"contact","frames":[10,39]},{"source":"me","predicate":"beside","target":"ch","family":"spatial","frames":[10,39]},{"source":"me","predicate":"in front of","target":"dr","family":"spatial","frames":[0,7]},{"source":"me","predicate":"holding","target":"br","family":"contact","frames":[32,39]},{"source":"me","predicate":"wearing","target":"sw","family":"contact","frames":[0,0]}],"actions":[{"label":"opening a door","start":0,"end":5},{"label":"drinking from a cup","start":8,"end":15},{"label":"eating a sandwich","start":18,"end":30},{"label":"holding a broom","start":32,"end":39},{"label":"sitting on a chair","start":10,"end":39}]}
"#;

static COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Mini source data written to a private temporary directory that is removed
/// on drop.
pub struct MiniWorld {
    dir: PathBuf,
    pub taxonomy: Taxonomy,
    pub catalog: ObjectCatalog,
    pub corpus: SceneGraphCorpus,
}

impl MiniWorld {
    pub fn new() -> Self {
        let dir = std::env::temp_dir().join(format!(
            "taskgen-mini-{}-{}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        Self::write_to(&dir).expect("mini world files are writable");
        let taxonomy = Taxonomy::parse(TAXONOMY).expect("mini taxonomy parses");
        let catalog = load_catalog(&dir.join("catalog.jsonl"), &taxonomy).expect("mini catalog loads");
        let corpus = SceneGraphCorpus::parse(CORPUS).expect("mini corpus parses");
        Self {
            dir,
            taxonomy,
            catalog,
            corpus,
        }
    }

    /// Writes taxonomy, catalog, sprites and corpus under `dir`.
    pub fn write_to(dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir.join("sprites"))?;
        std::fs::write(dir.join("taxonomy.txt"), TAXONOMY)?;
        std::fs::write(dir.join("corpus.jsonl"), CORPUS)?;
        let mut catalog = String::new();
        for (i, (id, cat, colors, material, shape, rgb)) in OBJECTS.iter().enumerate() {
            let sprite = format!("sprites/{id}.png");
            sprite_image(i, *rgb)
                .save(dir.join(&sprite))
                .map_err(std::io::Error::other)?;
            let rec = serde_json::json!({
                "id": id,
                "category": cat,
                "attributes": {"color": colors, "material": [material], "shape": [shape]},
                "sprite": sprite,
            });
            catalog.push_str(&rec.to_string());
            catalog.push('\n');
        }
        std::fs::write(dir.join("catalog.jsonl"), catalog)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn taxonomy_path(&self) -> PathBuf {
        self.dir.join("taxonomy.txt")
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.dir.join("catalog.jsonl")
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.dir.join("corpus.jsonl")
    }

    pub fn source(&self) -> SourceData {
        SourceData::new(self.taxonomy.clone())
            .with_catalog(self.catalog.clone())
            .with_corpus(self.corpus.clone())
    }
}

impl Default for MiniWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for MiniWorld {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

/// Opaque rectangle with a transparent border; aspect ratio varies by index.
fn sprite_image(i: usize, rgb: [u8; 3]) -> RgbaImage {
    let (w, h) = (48 + (i as u32 % 3) * 8, 40 + (i as u32 % 4) * 6);
    RgbaImage::from_fn(w, h, |x, y| {
        if x < 3 || y < 3 || x + 3 >= w || y + 3 >= h {
            Rgba([0, 0, 0, 0])
        } else {
            Rgba([rgb[0], rgb[1], rgb[2], 255])
        }
    })
}
