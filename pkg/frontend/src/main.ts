import { PfAgentApp } from './app';

document.addEventListener('DOMContentLoaded', () => {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app mount point');
  const app = new PfAgentApp(root);
  void app.init().then(() => {
    app.startPolling();
    const uploadBtn = document.getElementById('upload-send');
    uploadBtn?.addEventListener('click', () => {
      const name = (document.getElementById('upload-name') as HTMLInputElement).value.trim();
      const content = (document.getElementById('upload-content') as HTMLTextAreaElement).value;
      if (name && content) app.attachUpload(name, content);
    });
  });
});
