import { Client } from './api.js';
import { PollLoop } from './poll.js';
import { View } from './render.js';
import { SelectionStore } from './state.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const client = new Client('');
const store = new SelectionStore(client);
const view = new View(root, (id) => store.toggle(id));

store.onChange((selected) => view.showSelection(selected));

const poll = new PollLoop(client, ({ snapshot, surfaces }) => {
  store.applyServerSelection(
    surfaces.surfaces.filter((s) => s.selected).map((s) => s.id),
    surfaces.version,
  );
  view.showSelection(store.selected);
  view.showServerState(snapshot, surfaces);
});

poll.start();
