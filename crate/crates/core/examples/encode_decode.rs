//! Packs commands into 48-bit words and a big-endian binary image, then
//! decodes them back.
//!
//! ```bash
//! cargo run --example encode_decode
//! ```

use pels::asm::render;
use pels::isa::{decode, decode_image, encode, encode_image, ActionMode, Command, Condition};

fn main() {
    let program = [
        Command::capture(0x000, 0xFFFF).unwrap(),
        Command::jump_if(Condition::Ltu, 0x80, 3),
        Command::write(0x040, 0x1).unwrap(),
        Command::action(ActionMode::Toggle, 0, 0x1),
    ];

    println!("{:<28} {:>14}  opcode field12 operand", "command", "word");
    for cmd in &program {
        let word = encode(cmd);
        let bits = word.bits();
        println!(
            "{:<28} {:#014x}  {:>6x} {:>7x} {:>8x}",
            render(cmd),
            bits,
            bits >> 44,
            (bits >> 32) & 0xFFF,
            bits & 0xFFFF_FFFF
        );
        assert_eq!(decode(word).unwrap(), *cmd);
    }

    let image = encode_image(&program);
    println!("\nimage ({} bytes): {}", image.len(), hex::encode(&image));
    assert_eq!(decode_image(&image).unwrap(), program);
    println!("image decodes back to the same {} commands", program.len());
}
