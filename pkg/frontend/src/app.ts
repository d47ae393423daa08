// Entry point: wires the API client, session controller, keyboard map, and
// the DOM panels together.

import { ApiClient } from './api.js';
import { actionForKey } from './keymap.js';
import { PointView } from './pointview.js';
import { SessionController } from './session.js';

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function startApp(): void {
  const client = new ApiClient('');
  const annotator =
    window.localStorage.getItem('annotator') ||
    window.prompt('Annotator name?', 'anonymous') ||
    'anonymous';
  window.localStorage.setItem('annotator', annotator);

  const session = new SessionController(client, annotator);
  const image = byId<HTMLImageElement>('event-image');
  const eventLabel = byId<HTMLSpanElement>('event-id');
  const queueLabel = byId<HTMLSpanElement>('queue-remaining');
  const donePanel = byId<HTMLDivElement>('done-panel');
  const labelPanel = byId<HTMLDivElement>('label-panel');
  const errorBox = byId<HTMLDivElement>('error-box');
  const undoButton = byId<HTMLButtonElement>('undo-button');
  const progressBar = byId<HTMLDivElement>('progress-bar');
  const counters = byId<HTMLDivElement>('class-counters');
  const pointCanvas = byId<HTMLCanvasElement>('point-canvas');
  const pointView = new PointView(pointCanvas);
  let pointsVisible = false;

  session.subscribe((state) => {
    donePanel.style.display = state.done ? 'block' : 'none';
    labelPanel.style.display = state.done ? 'none' : 'block';
    errorBox.textContent = state.error ?? '';
    undoButton.disabled = !session.canUndo || state.busy;
    if (state.current) {
      eventLabel.textContent = state.current.event_id;
      queueLabel.textContent = String(state.current.remaining);
      image.src = client.imageUrl(state.current.event_id) + `#${Date.now()}`;
      if (pointsVisible) {
        client.points(state.current.event_id).then((p) => pointView.show(p));
      }
    }
    if (state.progress) {
      const { total, unlabeled, per_class } = state.progress;
      const doneCount = total - unlabeled;
      progressBar.style.width = total ? `${(100 * doneCount) / total}%` : '0';
      counters.textContent = Object.entries(per_class)
        .map(([name, count]) => `${name}: ${count}`)
        .join('   ');
    }
  });

  for (const [id, choice] of [
    ['button-proton', 'proton'],
    ['button-carbon', 'carbon'],
    ['button-other', 'other'],
  ] as const) {
    byId<HTMLButtonElement>(id).addEventListener('click', () =>
      session.submitLabel(choice),
    );
  }
  undoButton.addEventListener('click', () => session.undoLast());
  byId<HTMLButtonElement>('toggle-points').addEventListener('click', () => {
    pointsVisible = !pointsVisible;
    pointCanvas.style.display = pointsVisible ? 'block' : 'none';
    const current = session.getState().current;
    if (pointsVisible && current) {
      client.points(current.event_id).then((p) => pointView.show(p));
    }
  });

  window.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === 'label') void session.submitLabel(action.choice);
    else if (action.kind === 'undo') void session.undoLast();
    else byId<HTMLButtonElement>('toggle-points').click();
  });

  void session.fetchNext();
}

startApp();
