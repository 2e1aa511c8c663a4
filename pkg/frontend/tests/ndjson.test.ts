import { describe, expect, it } from 'vitest';

import { NdjsonParser } from '../src/ndjson.js';

describe('NdjsonParser', () => {
  it('parses complete lines', () => {
    const parser = new NdjsonParser<{ iter: number }>();
    expect(parser.push('{"iter":1}\n{"iter":2}\n')).toEqual([{ iter: 1 }, { iter: 2 }]);
  });

  it('reassembles records split across chunks', () => {
    const parser = new NdjsonParser<{ iter: number; phase: string }>();
    expect(parser.push('{"iter":1,"ph')).toEqual([]);
    expect(parser.push('ase":"early"}\n{"it')).toEqual([{ iter: 1, phase: 'early' }]);
    expect(parser.push('er":2,"phase":"mature"}\n')).toEqual([{ iter: 2, phase: 'mature' }]);
  });

  it('skips blank lines', () => {
    const parser = new NdjsonParser();
    expect(parser.push('\n\n{"a":1}\n\n')).toEqual([{ a: 1 }]);
  });

  it('flush returns a trailing record without newline', () => {
    const parser = new NdjsonParser();
    expect(parser.push('{"a":1}')).toEqual([]);
    expect(parser.flush()).toEqual([{ a: 1 }]);
    expect(parser.flush()).toEqual([]);
  });
});
