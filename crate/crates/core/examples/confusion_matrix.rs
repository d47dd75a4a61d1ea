//! Confusion matrix and accuracy for the damage-state classifier.
//!
//! ```bash
//! cargo run -p rcdamage --example confusion_matrix
//! ```

use rcdamage::classifier_eval::{accuracy, confusion};

fn main() -> rcdamage::Result<()> {
    let classes = ["DS0", "DS1", "DS2", "DS3"];
    let truth = ["DS0", "DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS3", "DS3"];
    let pred = ["DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS3", "DS2", "DS3"];
    let m = confusion(&pred, &truth, &classes)?;

    print!("{:>6}", "");
    for c in &m.classes {
        print!("{c:>8}");
    }
    println!();
    for (i, row) in m.normalized.iter().enumerate() {
        print!("{:>6}", m.classes[i]);
        for v in row {
            print!("{v:>8.3}");
        }
        println!("   (n={})", m.support(i));
    }
    println!("accuracy {:.3}", accuracy(&m)?);

    let collapse = confusion(
        &["no", "no", "collapse", "collapse"],
        &["no", "collapse", "collapse", "collapse"],
        &["no", "collapse"],
    )?;
    println!("collapse recall {:.3}", collapse.recall(1).unwrap_or(f64::NAN));
    Ok(())
}
