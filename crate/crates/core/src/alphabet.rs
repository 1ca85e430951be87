//! Character classes shared by the corpus, the renderer and the validator.

/// Punctuation kept in annotations. Every other symbol is ignored.
pub const PUNCTUATION: &str = ".,?!:;-";

/// Symbols that may be rendered (phone numbers) but never appear in annotations.
pub const IGNORED_SYMBOLS: &str = "+()";

pub fn is_cyrillic_letter(c: char) -> bool {
    matches!(c, '\u{0410}'..='\u{044F}' | 'Ё' | 'ё')
}

pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic()
}

pub fn is_punctuation(c: char) -> bool {
    PUNCTUATION.contains(c)
}

/// Characters allowed inside annotation text (besides the line separator).
pub fn is_allowed(c: char) -> bool {
    is_cyrillic_letter(c) || is_latin_letter(c) || c.is_ascii_digit() || c == ' ' || is_punctuation(c)
}

/// Characters the renderer may draw.
pub fn is_renderable(c: char) -> bool {
    is_allowed(c) || IGNORED_SYMBOLS.contains(c)
}

/// Every glyph a font must provide to be usable.
pub fn required_glyphs() -> impl Iterator<Item = char> {
    ('\u{0410}'..='\u{044F}')
        .chain(['Ё', 'ё'])
        .chain('A'..='Z')
        .chain('a'..='z')
        .chain('0'..='9')
        .chain(PUNCTUATION.chars())
        .chain(IGNORED_SYMBOLS.chars())
}
