// Keyboard-first labeling: throughput is the whole point of the tool.

import type { LabelChoice } from './api.js';

export type KeyAction =
  | { kind: 'label'; choice: LabelChoice }
  | { kind: 'undo' }
  | { kind: 'skip-view' };

export function actionForKey(key: string): KeyAction | null {
  switch (key) {
    case '1':
      return { kind: 'label', choice: 'proton' };
    case '2':
      return { kind: 'label', choice: 'carbon' };
    case '3':
      return { kind: 'label', choice: 'other' };
    case 'u':
    case 'U':
      return { kind: 'undo' };
    case 'z':
    case 'Z':
      return { kind: 'skip-view' };
    default:
      return null;
  }
}
